"""Acceptance suite: one test per release criterion, at its stated tolerance.

Each test prints a single "ACCEPTANCE PASS: ..." line on success so a plain
`pytest -s tests/test_acceptance.py` reads as a checklist.
"""

from __future__ import annotations

import json
import random
import time
from collections import Counter
from pathlib import Path

import pytest

from mrtrainer import reference_stats
from mrtrainer.backends import ScriptedLlm
from mrtrainer.cli import EXIT_OK, main
from mrtrainer.forge import simulate_tool_responses
from mrtrainer.metrics import MetricReport, bleu4, metric_stddev, rouge_l, rouge_n
from mrtrainer.service import SessionManager
from mrtrainer.simulator import (
    DIRECTIONS,
    TOOL_NAMES,
    ToolCall,
    dispatch,
    list_tools,
    new_session,
    replay_trace,
)
from mrtrainer.vision import MockRule, MockVisionBackend, NoDetectionFound, parse_detection_output

from .conftest import FIXTURES, make_manual
from .oracles import oracle_bleu4, oracle_rouge_l, oracle_rouge_n
from .test_agent import tool_block
from .test_vision import NOISE_WORDS, PUNCTED, wrap_pattern

MANUALS = str(FIXTURES / "manuals")
GEN_BACKEND = str(FIXTURES / "backends" / "gen_backend.json")


def _ok(label: str) -> None:
    print(f"ACCEPTANCE PASS: {label}")


# -- 1. metric fidelity ------------------------------------------------------------

def test_metric_fidelity_against_bruteforce_oracle():
    rng = random.Random(20_24)
    vocab = list("abcdefgh")
    started = time.monotonic()
    for _ in range(1000):
        cand = [rng.choice(vocab) for _ in range(rng.randint(0, 12))]
        ref = [rng.choice(vocab) for _ in range(rng.randint(0, 12))]
        assert abs(bleu4(cand, ref) - oracle_bleu4(cand, ref)) <= 1e-12
        assert abs(rouge_n(cand, ref, 1) - oracle_rouge_n(cand, ref, 1)) <= 1e-12
        assert abs(rouge_n(cand, ref, 2) - oracle_rouge_n(cand, ref, 2)) <= 1e-12
        assert abs(rouge_l(cand, ref) - oracle_rouge_l(cand, ref)) <= 1e-12
    elapsed = time.monotonic() - started
    assert elapsed < 10.0, f"took {elapsed:.1f}s"
    _ok(f"metric fidelity: 1000 random cases agree with the brute-force oracle "
        f"to 1e-12 in {elapsed:.2f}s")


# -- 2. dispersion reproduction -------------------------------------------------------

def test_dispersion_reproduction():
    reports = [
        MetricReport(
            model_id=model,
            **{m: scores[m][1] / 100.0 for m in MetricReport.METRIC_NAMES},
        )
        for model, scores in reference_stats.BENCHMARK_SCORES.items()
    ]
    assert len(reports) == 9
    sd = metric_stddev(reports)
    for metric, expected in reference_stats.REPORTED_FINETUNED_STDDEV.items():
        assert sd[metric] == pytest.approx(expected, abs=0.05), metric
    _ok("dispersion: nine fine-tuned reports reproduce "
        "19.60/17.79/16.02/20.64/19.85/19.19 within 0.05 (population sigma)")


# -- 3. tool state machine fuzz --------------------------------------------------------

FUZZ_VLM = MockVisionBackend(
    [
        MockRule("[detection]", "*", "fuzz piece 3 4 50 60"),
        MockRule("", "*", "No, not yet."),
    ]
)


def _random_call(rng: random.Random, total_steps: int) -> ToolCall:
    name = rng.choice(TOOL_NAMES)
    if name == "GoToStep":
        return ToolCall(name, {"step": rng.randint(-1, total_steps + 2)})
    if name == "Rotate":
        return ToolCall(name, {"direction": rng.choice(DIRECTIONS)})
    return ToolCall(name)


def test_state_machine_fuzz_100k():
    rng = random.Random(0xF00D)
    started = time.monotonic()
    steps_done = 0
    sessions = []  # (session, vlm): backend attachment is fixed per session
    while steps_done < 100_000:
        manual = make_manual(f"fuzz{len(sessions)}", steps=rng.randint(1, 8))
        session = new_session(f"fz{len(sessions)}", manual)
        vlm = FUZZ_VLM if rng.random() < 0.7 else None
        sessions.append((session, vlm))
        for _ in range(rng.randint(50, 400)):
            if steps_done >= 100_000:
                break
            call = _random_call(rng, session.total_steps)
            before = session.snapshot()
            trace_len = len(session.tool_trace)
            _, response = dispatch(session, call, vlm)
            session.check_invariants()
            assert len(session.tool_trace) == trace_len + 1
            if not response.ok:
                assert session.snapshot() == before
            steps_done += 1
    # replay every recorded trace on a fresh session: final state bit-exact
    for session, vlm in sessions:
        fresh = new_session(session.session_id, session.manual)
        replay_trace(fresh, session.tool_trace, vlm)
        assert fresh.snapshot() == session.snapshot()
        assert fresh.tool_trace == session.tool_trace
    elapsed = time.monotonic() - started
    assert elapsed < 30.0, f"took {elapsed:.1f}s"
    _ok(f"state machine: 100k fuzz steps across {len(sessions)} sessions held every "
        f"invariant, failures never mutated state, replays were bit-exact ({elapsed:.1f}s)")


# -- 4. registry completeness -----------------------------------------------------------

GOLDEN_REGISTRY = [
    ("StartAssemble", "Initiate the assembly process."),
    ("NextStep", "Move to the next assembly step."),
    ("FrontStep", "Go back to the previous assembly step."),
    ("Explode", "Trigger an explosion for detailed viewing."),
    ("Recover", "Restore the initial state of AR objects after explosion."),
    ("FinishedVideo",
     "End the assembly process and show a video of the assembled LEGO bricks."),
    ("ReShow", "Repeat the current assembly step."),
    ("Enlarge", "Enlarge or zoom out the current object."),
    ("Shrink", "Shrink or zoom in the current object."),
    ("GoToStep", "Go to the given assembly step number."),
    ("Rotate",
     'Rotate the current object to a direction ("Up", "Down", "Left", "Right", "None").'),
    ("ShowPieces", "Show all candidate LEGO pieces to be assembled."),
    ("HighlightCorrectComponents", "Highlight correct attachment points and components."),
    ("GetCurrentStep", "Get the number of the current step."),
    ("GetRemainingStep", "Get the number of the remaining steps."),
    ("CheckStepStatusVR",
     "Check whether the current step in Unity is accomplished correctly or not."),
    ("APICallObjectRecognitionAR",
     "Call the VLM agent to identify LEGO pieces based on the provided video streaming data "
     "from AR glasses and highlight the recognized pieces in the AR environment."),
    ("APICallCheckStepStatusAR",
     "Call the VLM agent to determine whether the current assembly step is completed correctly "
     "or not, using the provided video streaming data from AR glasses as input."),
]


def test_registry_matches_golden_table():
    assert list_tools() == GOLDEN_REGISTRY
    _ok("registry: list_tools returns exactly the 18 published names and descriptions")


# -- 5. agent loop determinism -------------------------------------------------------------

LOOP_SCRIPT = [
    tool_block("GetCurrentStep"), "We are at step 0 of 3; say begin whenever you're ready.",
    tool_block("StartAssemble"), "Started! Step 1 of 3: find the grey torso base.",
    tool_block("NextStep"), "Step 2 of 3: place the blue head plate.",
    tool_block("NextStep"), "Step 3 of 3: press in the antenna.",
    tool_block("FinishedVideo"), "Congratulations! Rolling the assembly video now.",
]


def _run_loop_fixture(data_dir: Path) -> tuple[bytes, bytes]:
    manual = make_manual("mini-robot", steps=3)
    manager = SessionManager(
        [manual],
        lambda: (ScriptedLlm(list(LOOP_SCRIPT)), None),
        data_dir=data_dir,
    )
    manager.create_session("mini-robot", session_id="fixture")
    manager.post_message("fixture", "where are we?")
    manager.post_message("fixture", "begin")
    manager.post_message("fixture", "next")
    manager.post_message("fixture", "next")
    for step in (1, 2, 3):
        manager.control_step("fixture", step, True)
    manager.post_message("fixture", "finish")
    sess = manager.get_session("fixture")
    assert sess.assembly.finished
    event_log = (data_dir / "fixture.jsonl").read_bytes()
    return event_log, sess.memory.to_jsonl().encode("utf-8")


def test_agent_loop_byte_identical_across_runs(tmp_path):
    events_a, memory_a = _run_loop_fixture(tmp_path / "run-a")
    events_b, memory_b = _run_loop_fixture(tmp_path / "run-b")
    assert events_a == events_b
    assert memory_a == memory_b
    names = [json.loads(line)["payload"]["call"]["name"]
             for line in events_a.decode().splitlines()
             if json.loads(line)["type"] == "tool_call"]
    assert names == ["GetCurrentStep", "StartAssemble", "NextStep", "NextStep", "FinishedVideo"]
    _ok("agent loop: scripted end-to-end fixture produced byte-identical "
        "event logs and memory across runs")


# -- 6. dataset pipeline determinism + structure ----------------------------------------------

def test_dataset_pipeline_determinism_and_structure(tmp_path, capsys):
    outs = []
    for sub in ("a", "b"):
        out_dir = tmp_path / sub
        assert main([
            "generate", "--manual-dir", MANUALS, "--backend", GEN_BACKEND,
            "--out-dir", str(out_dir), "--seed", "7",
        ]) == EXIT_OK
        outs.append({p.name: p.read_bytes() for p in sorted(out_dir.iterdir())})
    assert outs[0] == outs[1]

    from mrtrainer.forge import ConversationRecord, validate_conversation

    records = [
        ConversationRecord.from_dict(json.loads(line))
        for line in (tmp_path / "a" / "conversations.jsonl").read_bytes().decode().splitlines()
    ]
    assert records and all(validate_conversation(r) == [] for r in records)

    counts = Counter()
    for seed in range(10_000):
        names = [c.name for c, _ in simulate_tool_responses(seed)]
        assert 1 <= len(names) <= 6 and len(set(names)) == len(names), seed
        counts[len(names)] += 1
    for k in range(1, 7):
        assert abs(counts[k] / 10_000 - 1 / 6) <= 0.02
    _ok("dataset pipeline: seed-7 scripted run is byte-identical twice, every record "
        "validates clean, and 10k-seed tool sampling is 1..6 distinct and uniform")


# -- 7. detection parser robustness -------------------------------------------------------------

def test_detection_parser_robustness():
    rng = random.Random(777)
    for _ in range(1000):
        label = " ".join(rng.choice(("pair", "of", "legs", "upper", "body", "brick"))
                         for _ in range(rng.randint(1, 3)))
        x1, y1 = rng.randint(0, 500), rng.randint(0, 500)
        pattern = f"{label} {x1} {y1} {x1 + rng.randint(1, 80)} {y1 + rng.randint(1, 80)}"
        expected = parse_detection_output(pattern)
        got = parse_detection_output(wrap_pattern(rng, pattern))
        assert (got.object_label, got.box) == (expected.object_label, expected.box)
    for _ in range(1000):
        noise = " ".join(rng.choice(NOISE_WORDS + PUNCTED)
                         for _ in range(rng.randint(1, 30)))
        with pytest.raises(NoDetectionFound):
            parse_detection_output(noise)
    _ok("detection parser: 1000 noise-wrapped patterns parsed exactly; "
        "1000 integer-free noise strings produced zero false accepts")


# -- 8. desk-scale limits stated explicitly -------------------------------------------------------

def test_reference_figures_ship_as_fixtures_not_targets():
    # Full-scale figures depend on a commercial LLM and GPU fine-tuning, so a
    # desk-scale run cannot reproduce them; they ship as documented fixtures
    # whose internal consistency we can still check.
    r = reference_stats
    assert len(r.BENCHMARK_SCORES) == 9
    assert set(r.REPORTED_FINETUNED_STDDEV) == set(MetricReport.METRIC_NAMES)
    m = r.MANUAL_CORPUS
    assert m["instruction_steps"] / m["manuals"] == pytest.approx(
        m["avg_steps_per_manual"], abs=0.05
    )
    c = r.CONVERSATION_CORPUS
    assert m["avg_conversations_per_manual"] * m["manuals"] == pytest.approx(
        c["conversations"], abs=1.0
    )
    assert c["train_samples"] + c["test_samples"] == pytest.approx(
        c["context_response_pairs"], rel=0.005
    )
    assert c["test_samples"] / c["context_response_pairs"] == pytest.approx(0.199, abs=0.002)
    share = r.TOOL_CALL_SHARE_PERCENT
    assert share["NextStep"] == 57.02 and sum(share.values()) < 100.0
    assert set(share) <= set(TOOL_NAMES)
    print(
        "ACCEPTANCE NOTE: not reproducible at desk scale -> benchmark-table absolute "
        "scores, the 1,423-conversation / 26,405-pair corpus, and the tool-call "
        "distribution percentages; all ship as reference fixtures "
        "(mrtrainer.reference_stats) and are replaced here by the structural and "
        "property suites above."
    )
    _ok("desk-scale limits: reference figures load, are internally consistent, "
        "and are documented as fixtures rather than targets")
