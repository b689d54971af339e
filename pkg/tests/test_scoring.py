"""Score files, the heuristic scorer and the subprocess protocol."""

import json
import sys
import textwrap

import numpy as np
import pytest

from uhrkit.config import ScorerSpec
from uhrkit.errors import InvalidInputError, ParseError, ScorerUnavailableError
from uhrkit.metrics import GlcmFeatures, MetricVector
from uhrkit.records import ImageRecord
from uhrkit.scoring import (
    SubprocessScorer,
    apply_aesthetic_scores,
    heuristic_aesthetic,
    load_score_file,
)


# --- score files -------------------------------------------------------------

def test_load_score_file(tmp_path):
    p = tmp_path / "scores.jsonl"
    p.write_text(
        '{"path": "a.png", "score": 5.5, "model": "extra-ok"}\n'
        "\n"
        '{"path": "b.png", "score": 3}\n'
        '{"path": "a.png", "score": 7.0}\n',
        encoding="utf-8",
    )
    scores = load_score_file(p)
    assert scores == {"a.png": 7.0, "b.png": 3.0}


@pytest.mark.parametrize("line,why", [
    ("{oops", "invalid JSON"),
    ("[1]", "string 'path'"),
    ('{"score": 1.0}', "string 'path'"),
    ('{"path": "x.png"}', "numeric 'score'"),
    ('{"path": "x.png", "score": true}', "numeric 'score'"),
])
def test_load_score_file_errors(tmp_path, line, why):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"path": "ok.png", "score": 1.0}\n' + line + "\n", encoding="utf-8")
    with pytest.raises(ParseError) as err:
        load_score_file(p)
    assert err.value.line_number == 2
    assert why in str(err.value)


# --- heuristic ---------------------------------------------------------------

def test_heuristic_flat_gray_scores_zero():
    assert heuristic_aesthetic(np.full((8, 8, 3), 128.0)) == 0.0


def test_heuristic_rewards_chroma_and_contrast():
    flat = np.full((16, 16, 3), 90.0)
    rng = np.random.default_rng(0)
    colorful = rng.uniform(0.0, 255.0, size=(16, 16, 3))
    gray_noise = np.repeat(rng.uniform(0.0, 255.0, size=(16, 16, 1)), 3, axis=2)
    assert heuristic_aesthetic(colorful) > heuristic_aesthetic(gray_noise)
    assert heuristic_aesthetic(gray_noise) > heuristic_aesthetic(flat)


def test_heuristic_rejects_bad_shape():
    with pytest.raises(InvalidInputError):
        heuristic_aesthetic(np.zeros((4, 4)))


# --- assignment --------------------------------------------------------------

def _measured(path):
    dirs = tuple(GlcmFeatures(0.0, 0.0, 0.0, True) for _ in range(4))
    return ImageRecord(path=path, width=4, height=4,
                       metrics=MetricVector(1.0, 0.5, dirs, 1.0, 1.0, None))


def test_apply_scores_from_file(tmp_path):
    p = tmp_path / "s.jsonl"
    p.write_text('{"path": "a.png", "score": 4.5}\n', encoding="utf-8")
    recs = [_measured("a.png"), _measured("missing.png"),
            ImageRecord(path="bare.png", width=4, height=4)]
    spec = ScorerSpec(kind="score-file", location=str(p))
    unscored = apply_aesthetic_scores(recs, spec)
    assert recs[0].metrics.aesthetic == 4.5
    assert recs[1].metrics.aesthetic is None
    assert unscored == ["missing.png", "bare.png"]


def test_apply_scores_heuristic_needs_root():
    with pytest.raises(InvalidInputError):
        apply_aesthetic_scores([_measured("a.png")], ScorerSpec(kind="heuristic"))


def test_apply_scores_heuristic_on_corpus(tiny_corpus):
    recs = [_measured("noisy.png"), _measured("sub/deep.png"), _measured("gone.png")]
    unscored = apply_aesthetic_scores(recs, ScorerSpec(kind="heuristic"),
                                      root=tiny_corpus["corpus"])
    assert unscored == ["gone.png"]
    assert recs[0].metrics.aesthetic > 0.0
    assert recs[1].metrics.aesthetic > 0.0
    assert recs[2].metrics.aesthetic is None


def test_apply_scores_type_check():
    with pytest.raises(InvalidInputError):
        apply_aesthetic_scores([], spec="heuristic")


# --- subprocess protocol -----------------------------------------------------

def _scorer_script(tmp_path, body):
    p = tmp_path / "scorer.py"
    p.write_text("import json, sys\n" + textwrap.dedent(body), encoding="utf-8")
    return f"{sys.executable} {p}"


def test_subprocess_scorer_round_trip(tmp_path):
    cmd = _scorer_script(tmp_path, """
        for line in sys.stdin:
            req = json.loads(line)
            print(json.dumps({"path": req["path"], "score": float(len(req["path"]))}))
            sys.stdout.flush()
    """)
    with SubprocessScorer(cmd, timeout_s=10.0) as scorer:
        assert scorer.score("ab.png") == 6.0
        assert scorer.score("longer/name.png") == 15.0


def test_subprocess_scorer_recovers_from_garbage(tmp_path):
    cmd = _scorer_script(tmp_path, """
        first = True
        for line in sys.stdin:
            req = json.loads(line)
            if first:
                print("not json at all")
                first = False
            else:
                print(json.dumps({"path": req["path"], "score": 1.5}))
            sys.stdout.flush()
    """)
    with SubprocessScorer(cmd, timeout_s=10.0) as scorer:
        # first reply is malformed, the retry gets the real one
        assert scorer.score("x.png") == 1.5


def test_subprocess_scorer_gives_up_after_retries(tmp_path):
    cmd = _scorer_script(tmp_path, """
        for line in sys.stdin:
            pass  # never answer; exit cleanly on EOF
    """)
    with SubprocessScorer(cmd, timeout_s=0.2) as scorer:
        assert scorer.score("silent.png") is None


def test_subprocess_scorer_restarts_once(tmp_path):
    cmd = _scorer_script(tmp_path, """
        line = sys.stdin.readline()
        req = json.loads(line)
        print(json.dumps({"path": req["path"], "score": 2.0}))
        sys.stdout.flush()
    """)  # answers one request, then exits
    with SubprocessScorer(cmd, timeout_s=10.0) as scorer:
        assert scorer.score("one.png") == 2.0
        assert scorer.score("two.png") == 2.0  # served by the restarted child
        with pytest.raises(ScorerUnavailableError):
            scorer.score("three.png")


def test_subprocess_scorer_bad_command():
    with pytest.raises(ScorerUnavailableError):
        SubprocessScorer("/no/such/binary-here").__enter__()
    with pytest.raises(InvalidInputError):
        SubprocessScorer("")


def test_apply_scores_subprocess_kind(tmp_path):
    cmd = _scorer_script(tmp_path, """
        for line in sys.stdin:
            req = json.loads(line)
            print(json.dumps({"path": req["path"], "score": 9.0}))
            sys.stdout.flush()
    """)
    recs = [_measured("a.png"), _measured("b.png")]
    spec = ScorerSpec(kind="subprocess", location=cmd, timeout_s=10.0)
    assert apply_aesthetic_scores(recs, spec) == []
    assert [r.metrics.aesthetic for r in recs] == [9.0, 9.0]
