OUTPUT_VERSION = 1


def corpus_template(version):
    return {
        "version": version,
        "records": []
    }


def record_template():
    return {
        "id": "",
        "prompt": "",
        "reference": {},
        "hypotheses": {},
        "metadata": {}
    }


def transcript_template():
    return {
        "text": "",
        "phonemes": None,
        "phoneme_alphabet": None,
        "attempts": None
    }


def detection_template(record_id, model):
    """
    Per record and model output of `detect`

    :return:
    """
    row = {
        "version": OUTPUT_VERSION,
        "id": record_id,
        "model": model,
        "prompt_hypothesis": {
            "alignment": [],  # kind/ref_index/hyp_index/ref_token/hyp_token
            "errors": []  # kind/location/ref_token/hyp_token
        },
        "prompt_reference": {
            "alignment": [],
            "errors": []
        }
    }

    return row


def miscue_template(record_id, model):
    row = {
        "version": OUTPUT_VERSION,
        "id": record_id,
        "model": model,
        "predicted": [],  # category/location/kind/prompt_token/transcript_token/similarity scores
        "truth": []
    }

    return row


def model_report_template(model):
    row = {
        "model": model,
        "records": 0,
        "wer": None,
        "per": None,
        "error_ratio": None,
        "predicted_errors": 0,
        "true_errors": 0,
        "error_detection": {},  # per error kind and "all": tp/fp/fn/precision/recall/f1
        "error_shares": {},  # percentage of true errors per kind
        "miscue_detection": {},  # per miscue category and "all"
        "miscue_shares": {},
        "attempt_accuracy": None,
        "false_recognition": None,
        "confusions": None
    }

    return row


def report_template():
    """
    Structured report written by `evaluate`

    :return:
    """
    row = {
        "version": OUTPUT_VERSION,
        "corpus": "",
        "records": 0,
        "skipped": {},  # reason -> record ids
        "settings": {},
        "models": {}
    }

    return row


def confusion_report_template(level, k):
    return {
        "version": OUTPUT_VERSION,
        "level": level,
        "k": k,
        "models": {},
        "comparisons": []
    }


def injection_truth_template(seed):
    return {
        "version": OUTPUT_VERSION,
        "seed": seed,
        "records": {},  # record id -> list of miscue records
        "skipped": []
    }
