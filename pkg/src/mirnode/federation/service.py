"""Federation service: handshake, signed transport handlers, job orchestration.

Transport contract: callable(endpoint, method, path, headers, body) ->
(status, body). Raising OSError marks the peer unreachable. The same
`dispatch` entry point serves in-memory loopback transports and the HTTP
gateway.
"""
from __future__ import annotations

import json
import re
import secrets
import threading
import time
import uuid
from dataclasses import dataclass, field

from .aggregate import RoundResult, aggregate_round
from .envelope import (
    NonceCache,
    SIGNATURE_HEADER,
    envelope_from_header,
    sign_envelope,
    verify_envelope,
)
from .errors import (
    EndpointUnreachable,
    FederationError,
    GuardViolation,
    ParticipantRejected,
    QuorumNotMet,
    UnknownJob,
    UnknownLink,
)
from .guard import GuardDecision, SovereigntyPolicy, guard_message
from .links import (
    InstanceLink,
    LinkStore,
    invite_id_of,
    new_link_id,
    now_iso,
    unwrap_secret,
    wrap_secret,
)

HANDSHAKE_PATH = "/fed/v1/handshake"
_PARAMS_RE = re.compile(r"^/fed/v1/jobs/([0-9a-f]{32})/round/([0-9]+)/params$")
_RESULT_RE = re.compile(r"^/fed/v1/jobs/([0-9a-f]{32})/round/([0-9]+)/result$")


def _signature_of(headers: dict) -> str:
    # header names are case-insensitive on the wire; HTTP servers commonly
    # hand them over lowercased
    wanted = SIGNATURE_HEADER.lower()
    for key, value in headers.items():
        if str(key).lower() == wanted:
            return value
    return ""


@dataclass
class FederatedJob:
    job_id: str
    workflow: str
    participants: tuple[str, ...]
    rounds: int
    lr: float
    init_params: tuple[float, ...]
    quorum: int
    status: str = "pending"
    history: list = field(default_factory=list)
    final_params: tuple[float, ...] | None = None

    def to_json(self) -> dict:
        return {
            "job_id": self.job_id,
            "workflow": self.workflow,
            "participants": list(self.participants),
            "rounds": self.rounds,
            "lr": self.lr,
            "init_params": list(self.init_params),
            "quorum": self.quorum,
            "status": self.status,
            "final_params": (None if self.final_params is None
                             else list(self.final_params)),
            "history": [
                {
                    "round": record["round"],
                    "aggregated": list(record["aggregated"]),
                    "results": [
                        {"participant": r.participant,
                         "sample_count": r.sample_count,
                         "metrics": dict(r.metrics)}
                        for r in record["results"]
                    ],
                }
                for record in self.history
            ],
        }


class _Collector:
    def __init__(self, expected: set[str]):
        self.expected = set(expected)
        self.results: dict[str, RoundResult] = {}
        self.cond = threading.Condition()

    def add(self, result: RoundResult) -> None:
        with self.cond:
            if (result.participant in self.expected
                    and result.participant not in self.results):
                self.results[result.participant] = result
            self.cond.notify_all()

    def wait(self, timeout: float) -> list[RoundResult]:
        deadline = time.monotonic() + timeout
        with self.cond:
            while len(self.results) < len(self.expected):
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                self.cond.wait(remaining)
            return [self.results[p] for p in sorted(self.results)]


class FederationService:
    def __init__(self, instance_id: str, endpoint: str, db, engine=None,
                 policy: SovereigntyPolicy | None = None,
                 round_timeout: float = 120.0, clock=time.time, audit=None):
        self.instance_id = instance_id
        self.endpoint = endpoint
        self.links = LinkStore(db)
        self.engine = engine
        self.policy = policy or SovereigntyPolicy()
        self.round_timeout = round_timeout
        self.clock = clock
        self.nonces = NonceCache()
        self._audit_cb = audit
        self.audit_events: list[str] = []
        self._transport = None
        self._capabilities: dict[str, tuple] = {}  # workflow -> (defn, cohort)
        self._jobs: dict[str, FederatedJob] = {}
        self._collectors: dict[tuple[str, int], _Collector] = {}
        self._lock = threading.Lock()

    # -- wiring -----------------------------------------------------------------

    def set_transport(self, transport) -> None:
        self._transport = transport

    def enable_workflow(self, definition, cohort: str) -> None:
        """Advertise a workflow this instance will execute for its peers.

        The definition must contain a model-producing node (local training)."""
        if self.engine is None:
            raise FederationError("no workflow engine attached")
        from ..workflow import validate_definition

        defn = validate_definition(definition, self.engine.registry)
        if not any(
            any(kind == "model" for _, kind in
                self.engine.registry.spec(n.operator).output_slots)
            for n in defn.nodes
        ):
            raise FederationError(
                f"workflow {defn.name!r} has no model-producing node")
        self._capabilities[defn.name] = (defn, cohort)

    def capabilities(self) -> list[str]:
        return sorted(self._capabilities)

    def _audit(self, message: str) -> None:
        self.audit_events.append(message)
        if self._audit_cb is not None:
            self._audit_cb(message)

    # -- invites / handshake ------------------------------------------------------

    def issue_invite(self) -> str:
        return self.links.issue_invite(self.clock())

    def link_to(self, remote_endpoint: str, invite_token: str) -> InstanceLink:
        """Initiator (instance B) side: redeem the invite at A."""
        body = _dump({
            "kind": "control",
            "action": "handshake",
            "invite_id": invite_id_of(invite_token),
            "instance_id": self.instance_id,
            "endpoint": self.endpoint,
            "capabilities": self.capabilities(),
        })
        self._guard_out(body)
        key = bytes.fromhex(invite_token)
        env = sign_envelope(key, "POST", HANDSHAKE_PATH, body, self.clock())
        status, reply = self._send(remote_endpoint, "POST", HANDSHAKE_PATH,
                                   {SIGNATURE_HEADER: env.header_value()}, body)
        if status != 200:
            raise _error_from_reply(status, reply)
        self._guard_in(reply)
        doc = json.loads(reply.decode("utf-8"))
        secret = unwrap_secret(bytes.fromhex(doc["secret_wrapped"]), invite_token)
        link = InstanceLink(
            link_id=doc["link_id"],
            local_instance_id=self.instance_id,
            remote_instance_id=doc["instance_id"],
            remote_endpoint=doc["endpoint"],
            shared_secret=secret,
            capabilities=frozenset(doc.get("capabilities", [])),
            established_at=now_iso(),
        )
        self.links.add_link(link)
        return link

    def _handle_handshake(self, headers: dict, body: bytes) -> tuple[int, bytes]:
        decision = self._guard_in(body, raising=False)
        if not decision.allowed:
            return 403, _control_reply("denied", decision.reason)
        doc = json.loads(body.decode("utf-8"))
        invite_id = doc.get("invite_id", "")
        now = self.clock()
        try:
            key = self.links.peek_invite_key(invite_id, now)
        except FederationError as exc:
            return 403, _control_reply("rejected", type(exc).__name__)
        try:
            env = envelope_from_header("POST", HANDSHAKE_PATH, body,
                                       _signature_of(headers))
            verify_envelope(key, env, self.nonces, now)
        except FederationError as exc:
            self._audit(f"handshake signature rejected: {type(exc).__name__}")
            return 401, _control_reply("rejected", type(exc).__name__)
        remote_id = str(doc.get("instance_id", ""))
        remote_endpoint = str(doc.get("endpoint", ""))
        if not remote_id or not remote_endpoint:
            return 400, _control_reply("rejected", "missing instance_id/endpoint")
        token = self.links.consume_invite(invite_id, now)
        secret = secrets.token_bytes(32)
        link = InstanceLink(
            link_id=new_link_id(),
            local_instance_id=self.instance_id,
            remote_instance_id=remote_id,
            remote_endpoint=remote_endpoint,
            shared_secret=secret,
            capabilities=frozenset(doc.get("capabilities", [])),
            established_at=now_iso(),
        )
        self.links.add_link(link)
        reply = _dump({
            "kind": "control",
            "action": "handshake-ack",
            "link_id": link.link_id,
            "instance_id": self.instance_id,
            "endpoint": self.endpoint,
            "secret_wrapped": wrap_secret(secret, token).hex(),
            "capabilities": self.capabilities(),
        })
        self._guard_out(reply)
        return 200, reply

    # -- jobs (orchestrator side) ---------------------------------------------------

    def create_job(self, workflow: str, participants: list[str], rounds: int,
                   lr: float, init_params: list[float],
                   quorum: int | None = None) -> FederatedJob:
        if rounds < 1:
            raise ValueError("rounds must be >= 1")
        if not participants:
            raise ValueError("participants must be non-empty")
        if not init_params:
            raise ValueError("init_params must be non-empty")
        for link_id in participants:
            self.links.get(link_id)  # raises UnknownLink
        job = FederatedJob(
            job_id=uuid.uuid4().hex,
            workflow=workflow,
            participants=tuple(participants),
            rounds=rounds,
            lr=float(lr),
            init_params=tuple(float(v) for v in init_params),
            quorum=len(participants) if quorum is None else quorum,
        )
        with self._lock:
            self._jobs[job.job_id] = job
        return job

    def get_job(self, job_id: str) -> FederatedJob:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise UnknownJob(job_id)
        return job

    def list_jobs(self) -> list[FederatedJob]:
        with self._lock:
            return sorted(self._jobs.values(), key=lambda j: j.job_id)

    def run_job(self, job_id: str) -> list[float]:
        job = self.get_job(job_id)
        links = {lid: self.links.get(lid) for lid in job.participants}
        for lid, link in links.items():
            if job.workflow not in link.capabilities:
                job.status = "aborted"
                raise ParticipantRejected(
                    f"{lid}: workflow {job.workflow!r} not in capabilities")
        job.status = "running"
        params = list(job.init_params)
        for round_no in range(1, job.rounds + 1):
            collector = _Collector(set(job.participants))
            with self._lock:
                self._collectors[(job.job_id, round_no)] = collector
            try:
                self._dispatch_round(job, round_no, params, links)
                results = collector.wait(self.round_timeout)
            finally:
                with self._lock:
                    self._collectors.pop((job.job_id, round_no), None)
            if len(results) < job.quorum:
                job.history.append({"round": round_no, "results": results,
                                    "aggregated": []})
                job.status = "aborted"
                raise QuorumNotMet(
                    f"round {round_no}: {len(results)} of {job.quorum}")
            aggregated = aggregate_round(results)
            if len(aggregated) != len(job.init_params):
                job.status = "aborted"
                raise FederationError("aggregated dimension changed")
            job.history.append({"round": round_no, "results": results,
                                "aggregated": aggregated})
            params = aggregated
        job.status = "succeeded"
        job.final_params = tuple(params)
        return params

    def _dispatch_round(self, job: FederatedJob, round_no: int,
                        params: list[float], links: dict) -> None:
        body = _dump({
            "kind": "parameter-vector",
            "sender": self.instance_id,
            "job_id": job.job_id,
            "round": round_no,
            "workflow": job.workflow,
            "lr": job.lr,
            "params": list(params),
        })
        try:
            self._guard_out(body)
        except GuardViolation:
            job.status = "aborted"
            raise
        path = f"/fed/v1/jobs/{job.job_id}/round/{round_no}/params"
        rejections: list[str] = []
        threads = []

        def send_one(link: InstanceLink) -> None:
            env = sign_envelope(link.shared_secret, "POST", path, body,
                                self.clock())
            try:
                status, reply = self._send(
                    link.remote_endpoint, "POST", path,
                    {SIGNATURE_HEADER: env.header_value()}, body)
            except EndpointUnreachable:
                return  # non-respondent; quorum decides
            if status == 403:
                rejections.append(link.link_id)

        for link in links.values():
            t = threading.Thread(target=send_one, args=(link,), daemon=True)
            t.start()
            threads.append(t)
        for t in threads:
            t.join()
        if rejections:
            job.status = "aborted"
            raise ParticipantRejected(",".join(sorted(rejections)))

    # -- inbound dispatch ------------------------------------------------------------

    def dispatch(self, method: str, path: str, headers: dict,
                 body: bytes) -> tuple[int, bytes]:
        if method != "POST":
            return 405, _control_reply("rejected", "method not allowed")
        if path == HANDSHAKE_PATH:
            return self._handle_handshake(headers, body)
        m = _PARAMS_RE.match(path)
        if m:
            return self._handle_params(m.group(1), int(m.group(2)),
                                       headers, body, path)
        m = _RESULT_RE.match(path)
        if m:
            return self._handle_result(m.group(1), int(m.group(2)),
                                       headers, body, path)
        return 404, _control_reply("rejected", "unknown path")

    def _authenticate(self, method: str, path: str, headers: dict,
                      body: bytes) -> tuple[InstanceLink | None, GuardDecision,
                                            str]:
        """Shared receive pipeline: guard, then sender lookup, then MAC."""
        decision = self._guard_in(body, raising=False)
        if not decision.allowed:
            return None, decision, "guard"
        try:
            doc = json.loads(body.decode("utf-8"))
            link = self.links.by_remote_instance(str(doc.get("sender", "")))
        except (ValueError, UnknownLink):
            return None, decision, "unknown sender"
        try:
            env = envelope_from_header(method, path, body,
                                       _signature_of(headers))
            verify_envelope(link.shared_secret, env, self.nonces, self.clock())
        except FederationError as exc:
            self._audit(f"envelope rejected on {path}: {type(exc).__name__}")
            return None, decision, type(exc).__name__
        return link, decision, ""

    def _handle_params(self, job_id: str, round_no: int, headers: dict,
                       body: bytes, path: str) -> tuple[int, bytes]:
        link, decision, problem = self._authenticate("POST", path, headers, body)
        if not decision.allowed:
            return 403, _control_reply("denied", decision.reason)
        if link is None:
            return 401, _control_reply("rejected", problem)
        doc = json.loads(body.decode("utf-8"))
        workflow = str(doc.get("workflow", ""))
        if workflow not in self._capabilities:
            self._audit(f"params for unoffered workflow {workflow!r}")
            return 403, _control_reply("rejected", "workflow not offered")
        worker = threading.Thread(
            target=self._compute_and_reply,
            args=(link, job_id, round_no, doc), daemon=True)
        worker.start()
        return 202, _control_reply("accepted")

    def _compute_and_reply(self, link: InstanceLink, job_id: str,
                           round_no: int, doc: dict) -> None:
        try:
            defn, cohort = self._capabilities[doc["workflow"]]
            run_id = self.engine.submit(
                defn, cohort, f"fed:{job_id}",
                run_params={"w": json.dumps(doc["params"]),
                            "lr": float(doc["lr"])})
            run = self.engine.wait(run_id, self.round_timeout)
            if run.state != "succeeded":
                self._audit(f"job {job_id} round {round_no}: local run"
                            f" {run.state}")
                return
            model = self._model_output(run_id, defn)
        except Exception as exc:
            self._audit(f"job {job_id} round {round_no}:"
                        f" {type(exc).__name__}: {exc}")
            return
        reply = _dump({
            "kind": "parameter-vector",
            "sender": self.instance_id,
            "job_id": job_id,
            "round": round_no,
            "params": [float(v) for v in model["w"]],
            "n": int(model["n"]),
            "metrics": {},
        })
        try:
            self._guard_out(reply)
        except GuardViolation:
            return  # audited by the guard; orchestrator sees a no-show
        path = f"/fed/v1/jobs/{job_id}/round/{round_no}/result"
        env = sign_envelope(link.shared_secret, "POST", path, reply,
                            self.clock())
        try:
            self._send(link.remote_endpoint, "POST", path,
                       {SIGNATURE_HEADER: env.header_value()}, reply)
        except EndpointUnreachable:
            self._audit(f"job {job_id} round {round_no}: orchestrator"
                        " unreachable")

    def _model_output(self, run_id: str, defn) -> dict:
        for node in defn.nodes:
            spec = self.engine.registry.spec(node.operator)
            for slot_name, kind in spec.output_slots:
                if kind == "model":
                    return self.engine.run_value(run_id, node.id, slot_name)
        raise FederationError("run produced no model output")

    def _handle_result(self, job_id: str, round_no: int, headers: dict,
                       body: bytes, path: str) -> tuple[int, bytes]:
        link, decision, problem = self._authenticate("POST", path, headers, body)
        if not decision.allowed:
            return 403, _control_reply("denied", decision.reason)
        if link is None:
            return 401, _control_reply("rejected", problem)
        with self._lock:
            collector = self._collectors.get((job_id, round_no))
        if collector is None:
            return 404, _control_reply("rejected", "no open round")
        doc = json.loads(body.decode("utf-8"))
        try:
            result = RoundResult(
                participant=link.link_id,
                params=tuple(float(v) for v in doc["params"]),
                sample_count=int(doc["n"]),
                metrics=dict(doc.get("metrics", {})),
            )
        except (KeyError, TypeError, ValueError):
            return 400, _control_reply("rejected", "malformed result")
        collector.add(result)
        return 200, _control_reply("recorded")

    # -- shared plumbing --------------------------------------------------------------

    def _send(self, endpoint: str, method: str, path: str, headers: dict,
              body: bytes) -> tuple[int, bytes]:
        if self._transport is None:
            raise FederationError("no transport configured")
        try:
            return self._transport(endpoint, method, path, headers, body)
        except OSError as exc:
            raise EndpointUnreachable(f"{endpoint}: {exc}") from exc

    def _guard_out(self, body: bytes) -> None:
        decision = guard_message(
            body, self.policy,
            audit=lambda reason: self._audit(f"outbound message denied: {reason}"))
        if not decision.allowed:
            raise GuardViolation(decision.reason)

    def _guard_in(self, body: bytes, raising: bool = True) -> GuardDecision:
        decision = guard_message(
            body, self.policy,
            audit=lambda reason: self._audit(f"inbound message denied: {reason}"))
        if raising and not decision.allowed:
            raise GuardViolation(decision.reason)
        return decision


def _dump(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True).encode("utf-8")


def _control_reply(status: str, reason: str = "") -> bytes:
    doc = {"kind": "control", "status": status}
    if reason:
        doc["reason"] = reason
    return _dump(doc)


def _error_from_reply(status: int, reply: bytes) -> FederationError:
    from .errors import InviteAlreadyUsed, InviteExpired

    try:
        reason = json.loads(reply.decode("utf-8")).get("reason", "")
    except ValueError:
        reason = ""
    if reason == "InviteExpired":
        return InviteExpired("invite rejected by peer")
    if reason == "InviteAlreadyUsed":
        return InviteAlreadyUsed("invite rejected by peer")
    return FederationError(f"handshake failed with status {status}: {reason}")
