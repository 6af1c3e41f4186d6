import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterable, Optional

import requests

from normalize import DEFAULT_CONFIG, IPA, NormalizationConfig
from record import CorpusException, Transcript

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30
DEFAULT_RETRIES = 2
DEFAULT_BACKOFF = 5


class TransportError(CorpusException):
    def __init__(self, message, record_id=None):
        super().__init__(message, record_id)


class RemoteError(CorpusException):
    def __init__(self, status, message, record_id=None):
        super().__init__(f"Transcription service returned {status}: {message}", record_id)
        self.status = status
        self.detail = message


class RemoteTranscriber:
    """
    Thin client for an external transcription service: one POST per record with body
    {"id", optional "audio_ref"}, answered by {"text", optional "phonemes"}.
    """

    def __init__(self, endpoint, token=None, timeout=DEFAULT_TIMEOUT, retries=DEFAULT_RETRIES,
                 backoff=DEFAULT_BACKOFF, jobs=1, cfg: NormalizationConfig = DEFAULT_CONFIG):
        if not endpoint:
            raise CorpusException("Remote hypothesis source has no endpoint")
        self.endpoint: str = endpoint
        self.token: Optional[str] = token
        self.timeout: float = timeout
        self.retries: int = retries
        self.backoff: float = backoff
        self.jobs: int = max(1, jobs)
        self.cfg: NormalizationConfig = cfg

    def headers(self) -> dict:
        headers = {"Accept": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        return headers

    def request(self, record_id: str, audio_ref: Optional[str] = None) -> dict:
        """
        Posts one transcription request. Connection errors, timeouts and 5xx answers are retried
        `retries` times, waiting `backoff` seconds in between; anything else fails at once.

        :param record_id: corpus record id
        :param audio_ref: opaque audio reference forwarded to the service
        :return: decoded response body
        """
        body = {"id": record_id}
        if audio_ref is not None:
            body["audio_ref"] = audio_ref

        attempt = 0
        while True:
            attempt += 1
            try:
                res = requests.post(self.endpoint, json=body, headers=self.headers(), timeout=self.timeout)
            except (requests.exceptions.ConnectionError, requests.exceptions.Timeout) as e:
                if attempt > self.retries:
                    raise TransportError(f"Request for '{record_id}' failed after {attempt} attempts: {e}",
                                         record_id)
                logger.warning(f"Request for '{record_id}' failed ({e.__class__.__name__}). "
                               f"Waiting {self.backoff} seconds and trying again. Attempt {attempt}")
                time.sleep(self.backoff)
                continue

            if res.status_code // 100 == 5 and attempt <= self.retries:
                logger.warning(f"Server error {res.status_code} for '{record_id}'. "
                               f"Waiting {self.backoff} seconds and trying again. Attempt {attempt}")
                time.sleep(self.backoff)
                continue
            if res.status_code // 100 != 2:
                raise RemoteError(res.status_code, res.text[:200], record_id)

            try:
                data = res.json()
            except ValueError:
                raise RemoteError(res.status_code, "response body is not JSON", record_id)
            if not isinstance(data, dict) or not isinstance(data.get('text'), str):
                raise RemoteError(res.status_code, "response body has no 'text' field", record_id)
            return data

    def transcribe(self, record_id: str, audio_ref: Optional[str] = None) -> Transcript:
        data = self.request(record_id, audio_ref)
        return Transcript.from_text(data['text'], self.cfg, data.get('phonemes'),
                                    data.get('phoneme_alphabet', IPA), record_id=record_id)

    def transcribe_all(self, record_ids: Iterable[str], audio_refs: Optional[Dict[str, str]] = None
                       ) -> Dict[str, Transcript]:
        """
        Fetches many records with at most `jobs` requests in flight. The first failure is raised,
        so a batch either completes or produces nothing.
        """
        audio_refs = audio_refs or {}
        record_ids = sorted(set(record_ids))
        with ThreadPoolExecutor(max_workers=self.jobs) as executor:
            futures = {record_id: executor.submit(self.transcribe, record_id, audio_refs.get(record_id))
                       for record_id in record_ids}
            return {record_id: futures[record_id].result() for record_id in record_ids}
