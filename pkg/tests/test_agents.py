from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from wyvc.agents import (
    AddInvariant, Change, Fail, LemmaChain, MethodContext, SmtAgent, Success, TurnBudget,
    edit_from_json, edit_to_json, http_agent, outcome_from_json, prove_goal, scripted_agent, smt_agent,
)
from wyvc.errors import MalformedResponse
from wyvc.speclib import DEFAULT_LIBRARY
from wyvc.syntax import parse_formula
from wyvc.vcgen import Obligation, generate_obligations

from conftest import CORPUS, load, needs_solver


def _ob(method, name):
    return next(ob for ob in generate_obligations(method) if ob.name == name)


@needs_solver
def test_smt_agent_discharges_entry(sum_method):
    out = smt_agent(_ob(sum_method, "h.entry"), MethodContext(sum_method))
    assert isinstance(out, Success)
    assert out.chain.lemmas == () and out.calls_used == 1


@needs_solver
def test_smt_agent_on_true_goal(sum_method):
    out = smt_agent(Obligation("t", parse_formula("true")), MethodContext(sum_method))
    assert isinstance(out, Success) and out.calls_used == 1


@needs_solver
def test_smt_agent_reports_counterexample():
    m = load("mutants/sum_minus.wyv").main
    out = smt_agent(_ob(m, "h.loop"), MethodContext(m, timeout_ms=10_000))
    assert isinstance(out, Fail) and out.reason.startswith("Invalid")
    assert out.model is not None and out.model["xs"]


@needs_solver
def test_smt_agent_unknown_without_lemma(sum_method):
    ctx = MethodContext(sum_method, library=DEFAULT_LIBRARY.without("sum_take_succ"), timeout_ms=2000)
    out = smt_agent(_ob(sum_method, "h.loop"), ctx)
    assert isinstance(out, Fail) and out.reason.startswith("Unknown")


def test_fig1_fixture_changes_on_third_attempt(weak_sum):
    agent = scripted_agent(CORPUS / "fixtures/fig1.json")
    ob = _ob(weak_sum.main, "h.loop")
    ctx = MethodContext(weak_sum.main)
    kinds = [agent.attempt(ob, ctx, k).kind for k in (1, 2, 3)]
    assert kinds == ["Fail", "Fail", "Change"]
    edit = agent.attempt(ob, ctx, 3).edit
    assert isinstance(edit, AddInvariant) and edit.name == "hb" and edit.loop == 1


def test_scripted_single_success_and_unlisted(sum_method):
    agent = scripted_agent({"outcomes": [{"goal": "ensures.1", "attempt": 1, "kind": "success", "lemmas": []}]})
    ob = _ob(sum_method, "ensures.1")
    assert isinstance(agent.attempt(ob, MethodContext(sum_method), 1), Success)
    assert isinstance(agent.attempt(ob, MethodContext(sum_method), 2), Fail)


def test_empty_fixture_always_fails(sum_method):
    agent = scripted_agent({"outcomes": []})
    for ob in generate_obligations(sum_method):
        assert isinstance(agent.attempt(ob, MethodContext(sum_method), 1), Fail)


def test_replay_is_pure(weak_sum):
    agent = scripted_agent(CORPUS / "fixtures/fig1.json")
    ob = _ob(weak_sum.main, "ensures.1")
    ctx = MethodContext(weak_sum.main)
    assert [agent.attempt(ob, ctx, 2) for _ in range(3)] == [agent.attempt(ob, ctx, 2)] * 3


def test_unknown_reply_kind():
    with pytest.raises(MalformedResponse):
        outcome_from_json({"kind": "maybe"})
    with pytest.raises(MalformedResponse):
        outcome_from_json({"kind": "lemmas", "lemmas": "not a list"})


def test_edit_json_round_trip():
    d = {"add_invariant": {"loop": 1, "name": "hb", "formula": "i <= xs.size"}}
    edit = edit_from_json(d)
    assert edit_from_json(edit_to_json(edit)) == edit


def test_malformed_response_counted_as_fail(sum_method):
    class Garbled:
        name = "garbled"

        def attempt(self, ob, ctx, attempt):
            return outcome_from_json({"kind": "nonsense"})

    res = prove_goal(Garbled(), _ob(sum_method, "h.loop"), MethodContext(sum_method))
    assert isinstance(res.outcome, Fail) and res.agent_calls == 1


def test_budget_overrun_is_fail(sum_method):
    agent = scripted_agent({"outcomes": [{"goal": "h.loop", "attempt": 1, "kind": "fail", "calls_used": 5}]})
    res = prove_goal(agent, _ob(sum_method, "h.loop"), MethodContext(sum_method), TurnBudget(2))
    assert isinstance(res.outcome, Fail) and res.agent_calls <= 2
    with pytest.raises(ValueError):
        prove_goal(agent, _ob(sum_method, "h.loop"), MethodContext(sum_method), TurnBudget(0))


@needs_solver
def test_bogus_chain_downgraded(sum_method):
    agent = scripted_agent(CORPUS / "fixtures/bogus_chain.json")
    res = prove_goal(agent, _ob(sum_method, "ensures.1"), MethodContext(sum_method, timeout_ms=5000))
    assert res.raw_kind == "Success"
    assert isinstance(res.outcome, Fail) and "rejected lemma chain" in res.outcome.reason


@needs_solver
def test_lemma_naming_unknown_variable_rejected(sum_method):
    agent = scripted_agent({"outcomes": [{"goal": "h.loop", "attempt": 1, "kind": "lemmas",
                                          "lemmas": ["zz = 0"]}]})
    res = prove_goal(agent, _ob(sum_method, "h.loop"), MethodContext(sum_method))
    assert isinstance(res.outcome, Fail) and "unknown names" in res.outcome.reason


@needs_solver
def test_smt_agent_success_costs_one_solver_call(sum_method):
    res = prove_goal(SmtAgent(), _ob(sum_method, "h.entry"), MethodContext(sum_method))
    assert isinstance(res.outcome, Success)
    assert (res.agent_calls, res.solver_calls) == (0, 1)


# ---- HTTP transport against a local stub


class _Stub:
    def __init__(self, reply):
        self.reply = reply
        self.requests: list = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                n = int(self.headers["Content-Length"])
                stub.requests.append((dict(self.headers), json.loads(self.rfile.read(n))))
                body = stub.reply if isinstance(stub.reply, bytes) else json.dumps(stub.reply).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        self.server = HTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_port}/prove"
        threading.Thread(target=self.server.serve_forever, daemon=True).start()

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def stub():
    made = []

    def make(reply):
        s = _Stub(reply)
        made.append(s)
        return s

    yield make
    for s in made:
        s.close()


@pytest.mark.integration
@needs_solver
def test_http_lemma_reply_validated(stub, sum_method, monkeypatch):
    monkeypatch.setenv("WYVC_AGENT_KEY", "k-123")
    s = stub({"kind": "lemmas", "lemmas": ["sum(take(xs, i + 1)) = sum(take(xs, i)) + xs[i]"]})
    ob = _ob(sum_method, "h.loop")
    res = prove_goal(http_agent({"url": s.url, "name": "remote"}), ob,
                     MethodContext(sum_method, siblings=("h.entry",), timeout_ms=10_000))
    assert isinstance(res.outcome, Success)
    assert res.solver_calls == 2
    headers, body = s.requests[0]
    assert headers["Authorization"] == "Bearer k-123"
    assert body["obligation"]["name"] == "h.loop" and body["siblings"] == ["h.entry"]
    assert body["attempt"] == 1 and "method sum" in body["method"]


@pytest.mark.integration
def test_http_change_reply(stub, weak_sum):
    s = stub({"kind": "change", "edit": {"add_invariant": {"loop": 1, "name": "hb", "formula": "i <= xs.size"}},
              "justification": "needs the bound"})
    out = http_agent(s.url).attempt(_ob(weak_sum.main, "h.loop"), MethodContext(weak_sum.main), 1)
    assert isinstance(out, Change) and isinstance(out.edit, AddInvariant)


@pytest.mark.integration
def test_http_bad_replies_fail(stub, sum_method):
    ob = _ob(sum_method, "h.loop")
    ctx = MethodContext(sum_method)
    assert http_agent(stub({"kind": "dunno"}).url).attempt(ob, ctx, 1).reason.startswith("malformed")
    assert http_agent(stub(b"<html>").url).attempt(ob, ctx, 1).reason.startswith("malformed")
    assert http_agent("http://127.0.0.1:9/none").attempt(ob, ctx, 1).reason.startswith("network")


def test_chain_json_round_trip():
    chain = LemmaChain((parse_formula("x >= 0"), parse_formula("x + 1 > 0")), "two steps")
    assert LemmaChain.from_json(chain.to_json()) == chain
