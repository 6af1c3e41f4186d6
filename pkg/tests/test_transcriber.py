import pytest
import requests

import transcriber
from record import CorpusException
from transcriber import RemoteError, RemoteTranscriber, TransportError


class FakeResponse:
    def __init__(self, status_code=200, body=None, text=None):
        self.status_code = status_code
        self.body = body
        self.text = text if text is not None else str(body)

    def json(self):
        if self.body is None:
            raise ValueError("no JSON")
        return self.body


class FakeService:
    """
    Stands in for requests.post, answering from a queue of responses or exceptions
    """

    def __init__(self, answers):
        self.answers = list(answers)
        self.calls = []

    def __call__(self, url, json=None, headers=None, timeout=None):
        self.calls.append({"url": url, "json": json, "headers": headers, "timeout": timeout})
        answer = self.answers.pop(0) if len(self.answers) > 1 else self.answers[0]
        if isinstance(answer, Exception):
            raise answer
        return answer


@pytest.fixture
def sleeps(monkeypatch):
    waited = []
    monkeypatch.setattr(transcriber.time, "sleep", waited.append)
    return waited


def serve(monkeypatch, *answers):
    service = FakeService(answers)
    monkeypatch.setattr(transcriber.requests, "post", service)
    return service


def test_transcribe(monkeypatch, sleeps):
    service = serve(monkeypatch, FakeResponse(body={"text": "De kat zit.", "phonemes": "d ə k ɑ t"}))
    client = RemoteTranscriber("http://asr.local/transcribe", token="secret", timeout=7)
    transcript = client.transcribe("r1", "audio/r1.wav")

    assert transcript.words.norms() == ["de", "kat", "zit"]
    assert transcript.phonemes.symbols == ("d", "ə", "k", "ɑ", "t")
    call = service.calls[0]
    assert call["json"] == {"id": "r1", "audio_ref": "audio/r1.wav"}
    assert call["headers"]["Authorization"] == "Bearer secret"
    assert call["timeout"] == 7
    assert sleeps == []


def test_no_token_no_authorization_header():
    assert "Authorization" not in RemoteTranscriber("http://asr.local").headers()


def test_server_errors_are_retried(monkeypatch, sleeps):
    service = serve(monkeypatch, FakeResponse(503, text="busy"), FakeResponse(body={"text": "kat"}))
    client = RemoteTranscriber("http://asr.local", retries=2, backoff=5)
    assert client.transcribe("r1").words.norms() == ["kat"]
    assert len(service.calls) == 2
    assert sleeps == [5]


def test_retries_exhausted(monkeypatch, sleeps):
    service = serve(monkeypatch, FakeResponse(500, text="boom"))
    with pytest.raises(RemoteError) as e:
        RemoteTranscriber("http://asr.local", retries=2, backoff=1).transcribe("r1")
    assert e.value.status == 500
    assert len(service.calls) == 3
    assert sleeps == [1, 1]


def test_client_errors_fail_at_once(monkeypatch, sleeps):
    service = serve(monkeypatch, FakeResponse(404, text="unknown id"))
    with pytest.raises(RemoteError) as e:
        RemoteTranscriber("http://asr.local").transcribe("r1")
    assert e.value.status == 404
    assert e.value.record_id == "r1"
    assert len(service.calls) == 1


def test_connection_errors(monkeypatch, sleeps):
    service = serve(monkeypatch, requests.exceptions.ConnectionError("refused"))
    with pytest.raises(TransportError):
        RemoteTranscriber("http://asr.local", retries=1, backoff=2).transcribe("r1")
    assert len(service.calls) == 2
    assert sleeps == [2]


@pytest.mark.parametrize("response", [
    FakeResponse(200, body=None, text="<html>"),
    FakeResponse(200, body={"transcript": "kat"}),
])
def test_malformed_answers(monkeypatch, sleeps, response):
    serve(monkeypatch, response)
    with pytest.raises(RemoteError):
        RemoteTranscriber("http://asr.local").transcribe("r1")


def test_transcribe_all(monkeypatch, sleeps):
    def post(url, json=None, headers=None, timeout=None):
        return FakeResponse(body={"text": f"tekst {json['id']}"})

    monkeypatch.setattr(transcriber.requests, "post", post)
    client = RemoteTranscriber("http://asr.local", jobs=3)
    results = client.transcribe_all(["r3", "r1", "r2"])
    assert list(results) == ["r1", "r2", "r3"]
    assert results["r2"].words.norms() == ["tekst", "r2"]


def test_endpoint_required():
    with pytest.raises(CorpusException):
        RemoteTranscriber(None)
