"""End-to-end acceptance gate: one test per release criterion.

Each test re-derives its expected values independently (brute force, hand
computation, or exact arithmetic), exercises the system through its public
surface, and enforces the runtime budget it must meet on a laptop. One
pass/fail line per criterion comes from the test names under `pytest -v`;
each also prints a `[PASS]` summary with its measured runtime.
"""
from __future__ import annotations

import hashlib
import json
import random
import socket
import threading
import time
import urllib.error
import urllib.request

import numpy as np
import pytest

from gen_dicom import random_dataset, random_instance
from mirnode.archive import Archive, CohortQuery, Database
from mirnode.config import NodeConfig
from mirnode.dicom import (
    EXPLICIT_VR_LE,
    FileMeta,
    IMPLICIT_VR_LE,
    VERIFICATION_SOP_CLASS,
    parse_part10,
    render_preview,
    serialize_part10,
)
from mirnode.dimse import AssociationConfig, ScuAssociation
from mirnode.extensions import (
    DigestMismatch,
    ExtensionManager,
    NotInRegistry,
    UnsatisfiableConstraint,
    resolve_dependencies,
)
from mirnode.federation import (
    BadSignature,
    ClockSkew,
    FederationService,
    NonceCache,
    ReplayDetected,
    RoundResult,
    SIGNATURE_HEADER,
    SovereigntyPolicy,
    aggregate_round,
    envelope_from_header,
    sign_envelope,
    verify_envelope,
)
from mirnode.node import ResearchNode
from mirnode.workflow import (
    WorkflowEngine,
    builtin_registry,
    definition_from_json,
    plan_execution,
    validate_definition,
)

# shared scaffolding from the per-module suites
from test_archive import OracleModel, _build_corpus, _random_preds, to_query
from test_dicom_core import image_dataset, png_pixels
from test_extensions import (
    make_registry as make_ext_registry,
    oracle_solutions,
    random_problem,
    root_manifest,
    state_snapshot,
)
from test_federation import (
    Loopback,
    oracle_central_step,
    oracle_weighted_mean,
    store_partition,
    training_definition,
)
from test_workflow import (
    make_registry as make_wf_registry,
    random_dag_doc,
)
from mirnode.workflow import OperatorSpec


def _report(num: int, label: str, elapsed: float, budget: float) -> None:
    assert elapsed < budget, \
        f"criterion {num} took {elapsed:.2f}s, budget {budget:.0f}s"
    print(f"[PASS] criterion {num:2d}: {label} ({elapsed:.2f}s < {budget:.0f}s)")


# -- 1: DICOM round-trip ---------------------------------------------------------------


def test_criterion_01_dicom_round_trip():
    t0 = time.monotonic()
    rng = random.Random(0xACCE55)
    for i in range(100):
        ds = random_dataset(rng, max_depth=3, min_depth=3 if i % 4 == 0 else 0)
        for ts in (EXPLICIT_VR_LE, IMPLICIT_VR_LE):
            meta = FileMeta(transfer_syntax_uid=ts,
                            media_sop_class_uid="1.2.840.10008.5.1.4.1.1.7",
                            media_sop_instance_uid=f"1.2.3.{i}")
            blob = serialize_part10(meta, ds)
            meta2, ds2 = parse_part10(blob)
            assert meta2 == meta           # dataset-level identity, both ways
            assert ds2 == ds
            assert serialize_part10(meta2, ds2) == blob   # byte-level identity
    _report(1, "dicom round-trip, 100 datasets x 2 syntaxes",
            time.monotonic() - t0, 10)


# -- 2: DIMSE loopback -----------------------------------------------------------------


def test_criterion_02_dimse_loopback(tmp_path):
    t0 = time.monotonic()
    node = ResearchNode(NodeConfig(data_dir=str(tmp_path / "pacs"),
                                   http_port=0, dimse_port=0))
    node.start()
    try:
        rng = random.Random(50)
        sources = {}
        for _ in range(50):
            meta, ds = random_instance(rng)
            blob = serialize_part10(meta, ds)
            sources[meta.media_sop_instance_uid] = blob
        sop_classes = sorted({parse_part10(b)[0].media_sop_class_uid
                              for b in sources.values()})
        proposals = [(VERIFICATION_SOP_CLASS, (EXPLICIT_VR_LE,))]
        proposals += [(sc, (EXPLICIT_VR_LE,)) for sc in sop_classes]
        assoc = ScuAssociation.connect(
            "127.0.0.1", node.dimse_port,
            AssociationConfig(max_pdu_length=8192), proposals)
        assert assoc.echo() == 0x0000                     # echo before
        for blob in sources.values():
            assert assoc.store(blob) == 0x0000            # all 50 accepted
        assert assoc.echo() == 0x0000                     # echo after
        assoc.release()
        for sop_uid, blob in sources.items():
            archived = node.archive.get_instance_bytes(sop_uid)
            assert hashlib.sha256(archived).hexdigest() == \
                hashlib.sha256(blob).hexdigest()
    finally:
        node.stop()
    _report(2, "dimse loopback, 50 stores at max_pdu 8192",
            time.monotonic() - t0, 15)


# -- 3: query oracle equivalence ---------------------------------------------------------


def test_criterion_03_query_oracle_equivalence(tmp_path):
    t0 = time.monotonic()
    db = Database(tmp_path / "index.sqlite")
    archive = Archive(db, tmp_path / "blobs")
    rng = random.Random(0x0C0FFEE)
    oracle, patients, dates, modalities = _build_corpus(archive, rng,
                                                        n_instances=200)
    for i in range(500):
        preds = _random_preds(rng, patients, dates, modalities)
        q = to_query(preds)
        level = ("instance", "series", "study")[i % 3]
        if level == "instance":
            got = [r.sop_instance_uid for r in archive.query_index(q, level)]
            assert got == oracle.instances(preds), f"query {i}"
        elif level == "series":
            got = [(s.series_uid, s.instance_count)
                   for s in archive.query_index(q, level)]
            assert got == oracle.series(preds), f"query {i}"
        else:
            got = [(s.study_uid, s.series_count, s.instance_count)
                   for s in archive.query_index(q, level)]
            assert got == oracle.studies(preds), f"query {i}"
    attrs = ["Modality", "PatientID", "StudyDate", "BodyPartExamined", "Rows"]
    for i in range(100):
        preds = _random_preds(rng, patients, dates, modalities)
        attr = rng.choice(attrs)
        got = archive.aggregate_values(attr, to_query(preds))
        assert got == oracle.aggregate(attr, preds), f"aggregate {i}"
        assert sum(got.values()) == \
            len(archive.query_index(to_query(preds), "series"))
    db.close()
    _report(3, "500 queries + 100 aggregates vs brute-force scan",
            time.monotonic() - t0, 10)


# -- 4: scheduler soundness ---------------------------------------------------------------


def _boom(ctx, inputs, params):
    raise RuntimeError("induced failure")


def _dag_edges(doc: dict) -> list[tuple[str, str]]:
    return [(b["from_node"], nd["id"])
            for nd in doc["nodes"] for b in nd["inputs"]]


def _descendants(edges: list[tuple[str, str]], root: str) -> set[str]:
    out_of: dict[str, list[str]] = {}
    for u, v in edges:
        out_of.setdefault(u, []).append(v)
    seen, frontier = set(), [root]
    while frontier:
        for child in out_of.get(frontier.pop(), ()):
            if child not in seen:
                seen.add(child)
                frontier.append(child)
    return seen


def test_criterion_04_scheduler_soundness(tmp_path):
    t0 = time.monotonic()
    extra = [(OperatorSpec(
        name=f"boom{k}",
        input_slots=tuple((f"in{i}", "params") for i in range(k)),
        output_slots=(("out", "params"),)), _boom) for k in range(4)]
    registry = make_wf_registry(extra)
    db = Database(tmp_path / "index.sqlite")
    archive = Archive(db, tmp_path / "blobs")
    engine = WorkflowEngine(archive, registry, tmp_path / "runs",
                            worker_count=4)
    rng = random.Random(0xDA6)
    try:
        for case in range(200):
            doc = random_dag_doc(rng, max_nodes=12)
            edges = _dag_edges(doc)
            inject = case % 5 == 0               # 40 runs get a failure
            victim = None
            if inject:
                victim_doc = rng.choice(doc["nodes"])
                victim = victim_doc["id"]
                victim_doc["operator"] = "boom" + victim_doc["operator"][-1]
            defn = validate_definition(definition_from_json(doc), registry)
            run_id = engine.submit(defn, "", "acceptance")
            run = engine.wait(run_id, 30)
            states = {n: s.state for n, s in run.node_states.items()}
            if not inject:
                assert run.state == "succeeded", f"case {case}"
                # every edge ordering respected by the recorded intervals
                for u, v in edges:
                    up, down = run.node_states[u], run.node_states[v]
                    assert up.ended_at <= down.started_at, f"case {case} {u}->{v}"
            else:
                assert run.state == "failed", f"case {case}"
                skipped = _descendants(edges, victim)
                for node_id, state in states.items():
                    if node_id == victim:
                        assert state == "failed", f"case {case}"
                    elif node_id in skipped:
                        assert state == "skipped", f"case {case} {node_id}"
                    else:
                        assert state == "succeeded", f"case {case} {node_id}"
        # diamond staging against the literal enumeration answer
        diamond = {
            "name": "diamond", "version": "1.0.0", "retry_limit": 1,
            "nodes": [
                {"id": "a", "operator": "emit0", "params": {}, "inputs": []},
                {"id": "b", "operator": "emit1", "params": {},
                 "inputs": [{"from_node": "a", "slot": "out"}]},
                {"id": "c", "operator": "emit1", "params": {},
                 "inputs": [{"from_node": "a", "slot": "out"}]},
                {"id": "d", "operator": "emit2", "params": {},
                 "inputs": [{"from_node": "b", "slot": "out"},
                            {"from_node": "c", "slot": "out"}]},
            ],
        }
        plan = plan_execution(validate_definition(
            definition_from_json(diamond), registry))
        assert [list(stage) for stage in plan.stages] == [["a"], ["b", "c"], ["d"]]
    finally:
        engine.shutdown()
        db.close()
    _report(4, "200 random DAGs incl. 40 injected failures + diamond stages",
            time.monotonic() - t0, 30)


# -- 5: federated correctness ---------------------------------------------------------------


def test_criterion_05_federated_correctness(tmp_path):
    t0 = time.monotonic()
    clock_now = 1_700_000_000.0
    transport = Loopback()
    engines = []

    def make(name, with_engine=True):
        root = tmp_path / name
        db = Database(root / "node.sqlite")
        engine = None
        if with_engine:
            archive = Archive(db, root / "blobs")
            engine = WorkflowEngine(archive, builtin_registry(),
                                    root / "data", worker_count=2)
            engines.append(engine)
        service = FederationService(
            f"inst-{name}", f"mem://{name}", db, engine=engine,
            policy=SovereigntyPolicy(), round_timeout=15.0,
            clock=lambda: clock_now)
        transport.register(service)
        return service

    try:
        rng = np.random.default_rng(5)
        d, n = 5, 300
        x = rng.normal(size=(n, d))
        y = x @ rng.normal(size=d) + rng.normal(scale=0.1, size=n)
        orch = make("orch", with_engine=False)
        links = []
        for k in range(3):
            part = make(f"p{k}")
            sl = slice(k * 100, (k + 1) * 100)       # equal partitions
            store_partition(part, x[sl], y[sl])
            part.enable_workflow(training_definition(), "")
            links.append(part.link_to(orch.endpoint,
                                      orch.issue_invite()).link_id)
        w0 = np.zeros(d)
        lr = 0.05
        job = orch.create_job("training", links, rounds=1, lr=lr,
                              init_params=list(w0))
        final = orch.run_job(job.job_id)
        want = oracle_central_step(x, y, w0, lr)     # centralized full batch
        np.testing.assert_allclose(final, want, rtol=0, atol=1e-9)

        # weighted-average aggregation against exact rational arithmetic
        prng = random.Random(55)
        for _ in range(100):
            dim = prng.randrange(1, 8)
            updates = [(f"p{j}",
                        [prng.uniform(-5, 5) for _ in range(dim)],
                        prng.randrange(1, 500))
                       for j in range(prng.randrange(1, 6))]
            got = aggregate_round([RoundResult(pid, tuple(vec), cnt)
                                   for pid, vec, cnt in updates])
            want_mean = oracle_weighted_mean(
                [(vec, cnt) for _, vec, cnt in updates])
            np.testing.assert_allclose(got, want_mean, rtol=0, atol=1e-12)
    finally:
        for engine in engines:
            engine.shutdown()
    _report(5, "3-node round vs centralized step + 100 weighted means",
            time.monotonic() - t0, 10)


# -- 6: sovereignty (wire capture) -----------------------------------------------------------


class CaptureProxy:
    """TCP forwarder recording every byte that crosses it, both directions."""

    def __init__(self, capture: bytearray, lock: threading.Lock):
        self.capture = capture
        self.lock = lock
        self.target_port: int | None = None
        self._server = socket.create_server(("127.0.0.1", 0))
        self.port = self._server.getsockname()[1]
        self._closing = False
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)

    def start(self) -> None:
        self._thread.start()

    def _accept_loop(self) -> None:
        while not self._closing:
            try:
                client, _ = self._server.accept()
            except OSError:
                return
            try:
                upstream = socket.create_connection(
                    ("127.0.0.1", self.target_port), timeout=10)
            except OSError:
                client.close()
                continue
            for src, dst in ((client, upstream), (upstream, client)):
                threading.Thread(target=self._pipe, args=(src, dst),
                                 daemon=True).start()

    def _pipe(self, src: socket.socket, dst: socket.socket) -> None:
        try:
            while True:
                chunk = src.recv(65536)
                if not chunk:
                    break
                with self.lock:
                    self.capture += chunk
                dst.sendall(chunk)
        except OSError:
            pass
        finally:
            for s in (src, dst):
                try:
                    s.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass

    def stop(self) -> None:
        self._closing = True
        self._server.close()


def test_criterion_06_sovereignty_wire_capture(tmp_path):
    t0 = time.monotonic()
    capture = bytearray()
    lock = threading.Lock()
    proxies, nodes = {}, {}
    try:
        for label in ("a", "b", "c"):
            proxy = CaptureProxy(capture, lock)
            cfg = NodeConfig(data_dir=str(tmp_path / label), http_port=0,
                             dimse_port=0, instance_id=f"acc-{label}",
                             public_endpoint=f"http://127.0.0.1:{proxy.port}")
            node = ResearchNode(cfg)
            node.start()
            proxy.target_port = node.http_port
            proxy.start()
            proxies[label], nodes[label] = proxy, node

        rng = np.random.default_rng(6)
        x = rng.normal(size=(60, 3))
        y = x @ np.array([1.0, -2.0, 0.5]) + rng.normal(scale=0.1, size=60)
        orch = nodes["a"].federation
        link_ids = []
        for k, label in enumerate(("b", "c")):
            part = nodes[label].federation
            store_partition(part, x[k * 30:(k + 1) * 30], y[k * 30:(k + 1) * 30])
            part.enable_workflow(training_definition(), "")
            link = part.link_to(orch.endpoint, orch.issue_invite())
            link_ids.append(link.link_id)

        job = orch.create_job("training", link_ids, rounds=3, lr=0.05,
                              init_params=[0.0, 0.0, 0.0])
        final = orch.run_job(job.job_id)
        assert len(final) == 3 and job.status == "succeeded"

        with lock:
            wire = bytes(capture)
        assert len(wire) > 0
        assert wire.count(b"DICM") == 0
        assert wire.count(bytes([0xE0, 0x7F, 0x10, 0x00])) == 0

        # a correctly signed envelope smuggling a Part-10 file is refused
        part_b = nodes["b"]
        secret = part_b.federation.links.list_links()[0].shared_secret
        meta, ds = random_instance(random.Random(66))
        dicom_blob = serialize_part10(meta, ds)
        body = json.dumps({
            "kind": "parameter-vector", "params": [1.0],
            "sender": orch.instance_id,
            "payload": dicom_blob.decode("latin-1"),
        }).encode()
        assert b"DICM" in body
        path = f"/fed/v1/jobs/{'ab' * 16}/round/1/params"
        env = sign_envelope(secret, "POST", path, body, time.time())
        before = part_b.audit.last_seq()
        request = urllib.request.Request(
            f"http://127.0.0.1:{part_b.http_port}{path}", data=body,
            headers={SIGNATURE_HEADER: env.header_value(),
                     "Content-Type": "application/json"}, method="POST")
        with pytest.raises(urllib.error.HTTPError) as err:
            urllib.request.urlopen(request, timeout=10)
        assert err.value.code == 403
        denials = [e for e in part_b.audit.events(after_seq=before)
                   if e.action == "federation" and e.outcome == "denied"]
        assert len(denials) == 1
    finally:
        for node in nodes.values():
            node.stop()
        for proxy in proxies.values():
            proxy.stop()
    _report(6, "3-round job wire capture clean; DICOM envelope denied+audited",
            time.monotonic() - t0, 10)


# -- 7: envelope security ---------------------------------------------------------------


def test_criterion_07_envelope_security():
    t0 = time.monotonic()
    rng = random.Random(0x5EC)
    secret = bytes(range(32))
    path = "/fed/v1/jobs/feed/round/1/params"
    now = 1_700_000_000.0
    rejected = {"flip_body": 0, "flip_mac": 0, "stale": 0, "replay": 0}
    for i in range(1000):
        body = json.dumps({"kind": "count", "n": i}).encode()
        env = sign_envelope(secret, "POST", path, body, now)
        header = env.header_value()
        # the unmodified envelope is always accepted
        ok = envelope_from_header("POST", path, body, header)
        assert verify_envelope(secret, ok, NonceCache(), now) == body
        mode = ("flip_body", "flip_mac", "stale", "replay")[i % 4]
        if mode == "flip_body":
            mutated = bytearray(body)
            mutated[rng.randrange(len(mutated))] ^= 1 << rng.randrange(8)
            bad = envelope_from_header("POST", path, bytes(mutated), header)
            with pytest.raises(BadSignature):
                verify_envelope(secret, bad, NonceCache(), now)
        elif mode == "flip_mac":
            mac = header.rsplit("mac=", 1)[1]
            pos = rng.randrange(len(mac))
            alt = "0" if mac[pos] != "0" else "1"
            bad_header = header[:-len(mac)] + mac[:pos] + alt + mac[pos + 1:]
            bad = envelope_from_header("POST", path, body, bad_header)
            with pytest.raises(BadSignature):
                verify_envelope(secret, bad, NonceCache(), now)
        elif mode == "stale":
            old = sign_envelope(secret, "POST", path, body,
                                now - 301 - rng.randrange(10_000))
            bad = envelope_from_header("POST", path, body, old.header_value())
            with pytest.raises(ClockSkew):
                verify_envelope(secret, bad, NonceCache(), now)
        else:  # replay
            cache = NonceCache()
            fresh = envelope_from_header("POST", path, body, header)
            assert verify_envelope(secret, fresh, cache, now) == body
            with pytest.raises(ReplayDetected):
                verify_envelope(secret, fresh, cache, now)
        rejected[mode] += 1
    assert all(v == 250 for v in rejected.values())
    _report(7, "1000 mutated envelopes rejected with exact error classes",
            time.monotonic() - t0, 5)


# -- 8: extension resolution ---------------------------------------------------------------


def _version_key(text: str) -> tuple[int, int, int]:
    major, minor, patch = text.split(".")
    return int(major), int(minor), int(patch)


def _is_maximal(chosen: dict, solutions: list[dict]) -> bool:
    for other in solutions:
        if other == chosen or set(other) != set(chosen):
            continue
        ge_all = all(_version_key(other[k][0]) >= _version_key(chosen[k][0])
                     for k in chosen)
        gt_any = any(_version_key(other[k][0]) > _version_key(chosen[k][0])
                     for k in chosen)
        if ge_all and gt_any:
            return False
    return True


def test_criterion_08_extension_resolution(tmp_path):
    t0 = time.monotonic()
    rng = random.Random(0xE57)
    solved = 0
    attempts = 0
    while solved < 50 and attempts < 400:
        attempts += 1
        problem = random_problem(rng)
        problem["installed"] = {}       # fresh platform: pure maximality holds
        registry = make_ext_registry(problem["index"])
        root = root_manifest(problem["root_deps"])
        solutions = oracle_solutions(problem)
        try:
            plan = resolve_dependencies(root, {}, registry)
        except (UnsatisfiableConstraint, NotInRegistry):
            assert solutions == [], "resolver gave up on a solvable registry"
            continue
        chosen = {p.name: (p.version, p.reused) for p in plan
                  if p.name != "root-pkg"}
        assert chosen in solutions, "resolver answer is not a solution"
        assert _is_maximal(chosen, solutions), \
            f"{chosen} is not maximal among {len(solutions)} solutions"
        solved += 1
    assert solved == 50, f"only {solved} solvable registries in {attempts} draws"

    # a failed install must leave platform state byte-identical
    db = Database(tmp_path / "node.sqlite")
    corrupt_registry = make_ext_registry(
        {"alpha": {"1.0.0": []}}, corrupt={("alpha", "1.0.0")})
    manager = ExtensionManager(db, tmp_path / "ext",
                               operator_registry=builtin_registry(),
                               registry=corrupt_registry)
    before = state_snapshot(manager)
    with pytest.raises(DigestMismatch):
        manager.install_from_registry("alpha")
    assert state_snapshot(manager) == before
    db.close()
    _report(8, "50 solvable registries vs brute-force maximal assignment",
            time.monotonic() - t0, 10)


# -- 9: RBAC matrix over live HTTP -----------------------------------------------------------


ROLE_MATRIX = [
    ("viewer", "view", True), ("viewer", "query", True),
    ("viewer", "tag", False), ("viewer", "ingest", False),
    ("viewer", "run_workflow", False), ("viewer", "manage_extensions", False),
    ("viewer", "manage_federation", False), ("viewer", "manage_users", False),
    ("researcher", "view", True), ("researcher", "query", True),
    ("researcher", "tag", True), ("researcher", "ingest", True),
    ("researcher", "run_workflow", True),
    ("researcher", "manage_extensions", False),
    ("researcher", "manage_federation", False),
    ("researcher", "manage_users", False),
    ("admin", "view", True), ("admin", "query", True),
    ("admin", "tag", True), ("admin", "ingest", True),
    ("admin", "run_workflow", True), ("admin", "manage_extensions", True),
    ("admin", "manage_federation", True), ("admin", "manage_users", True),
]


def _live(method, url, *, token=None, payload=None, raw=None, ctype=None):
    headers = {}
    if token:
        headers["Authorization"] = f"Bearer {token}"
    data = raw
    if payload is not None:
        data = json.dumps(payload).encode()
        headers["Content-Type"] = "application/json"
    elif ctype:
        headers["Content-Type"] = ctype
    request = urllib.request.Request(url, data=data, headers=headers,
                                     method=method)
    try:
        with urllib.request.urlopen(request, timeout=10) as resp:
            return resp.status, json.loads(resp.read() or b"{}")
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read() or b"{}")


def test_criterion_09_rbac_matrix_live(tmp_path):
    t0 = time.monotonic()
    node = ResearchNode(NodeConfig(data_dir=str(tmp_path / "rbac"),
                                   http_port=0, dimse_port=0))
    principals = {role: node.users.add_user(role, f"pw-{role}-123", {role})
                  for role in ("viewer", "researcher", "admin")}
    node.start()
    try:
        base = f"http://127.0.0.1:{node.http_port}/api/v1"
        tokens = {}
        for role in principals:
            status, doc = _live("POST", f"{base}/login",
                                payload={"username": role,
                                         "password": f"pw-{role}-123"})
            assert status == 200
            tokens[role] = doc["token"]

        probes = {
            "view": lambda t, i: _live("GET", f"{base}/runs", token=t),
            "query": lambda t, i: _live("GET", f"{base}/instances", token=t),
            "tag": lambda t, i: _live(
                "POST", f"{base}/tags", token=t,
                payload={"series": ["missing"], "add": ["x"]}),
            "ingest": lambda t, i: _live(
                "POST", f"{base}/studies", token=t, raw=b"junk",
                ctype="application/octet-stream"),
            "run_workflow": lambda t, i: _live(
                "POST", f"{base}/workflows/ghost/runs", token=t,
                payload={"cohort": ""}),
            "manage_extensions": lambda t, i: _live(
                "POST", f"{base}/extensions", token=t, raw=b"",
                ctype="application/gzip"),
            "manage_federation": lambda t, i: _live(
                "POST", f"{base}/federation/invites", token=t),
            "manage_users": lambda t, i: _live(
                "POST", f"{base}/users", token=t,
                payload={"username": f"probe-{i}", "password": "pw-123456",
                         "roles": ["viewer"]}),
        }
        expected_ok = {"view": 200, "query": 200, "tag": 404, "ingest": 400,
                       "run_workflow": 404, "manage_extensions": 400,
                       "manage_federation": 201, "manage_users": 201}

        assert len(ROLE_MATRIX) == 24
        for i, (role, action, allowed) in enumerate(ROLE_MATRIX):
            before = node.audit.last_seq()
            status, doc = probes[action](tokens[role], i)
            events = node.audit.events(after_seq=before)
            label = f"{role}/{action}"
            if allowed:
                assert status == expected_ok[action], (label, status, doc)
                denied = [e for e in events if e.outcome == "denied"]
                assert denied == [], label
            else:
                assert status == 403, (label, status, doc)
                assert doc["error_code"] == "permission_denied", label
                # exactly one audit event per denial
                assert len(events) == 1, (label, events)
                assert (events[0].principal, events[0].action,
                        events[0].outcome) == \
                    (principals[role].id, action, "denied"), label

        # the chain verifies end-to-end over live HTTP ...
        status, doc = _live("GET", f"{base}/audit", token=tokens["admin"])
        assert status == 200
        assert doc["first_invalid"] is None
        assert len(doc["events"]) >= 8
        # ... and a single flipped byte is detected
        target_seq = len(doc["events"]) // 2
        row = node.db.query_one(
            "SELECT resource FROM audit_events WHERE seq = ?", (target_seq,))
        original = row["resource"] or "x"
        flipped = chr(ord(original[0]) ^ 0x01) + original[1:]
        with node.db.tx() as conn:
            conn.execute("UPDATE audit_events SET resource = ? WHERE seq = ?",
                         (flipped, target_seq))
        status, doc = _live("GET", f"{base}/audit", token=tokens["admin"])
        assert doc["first_invalid"] == target_seq
    finally:
        node.stop()
    _report(9, "24 live-HTTP role/action pairs + tamper-evident chain",
            time.monotonic() - t0, 5)


# -- 10: preview correctness ---------------------------------------------------------------


def test_criterion_10_preview_correctness():
    t0 = time.monotonic()
    # hand-derived: v=40, WC=40, WW=400 -> ((40-39.5)/399 + 0.5)*255 = 127.8 -> 128
    ds = image_dataset(np.array([[40]], dtype=np.uint16), wc=40, ww=400)
    out = png_pixels(render_preview(ds, max_edge=64))
    assert out.shape == (1, 1)
    assert int(out[0, 0]) == 128

    ramp = np.arange(256, dtype=np.uint16).reshape(16, 16) * 16
    out = png_pixels(render_preview(image_dataset(ramp), max_edge=16))
    flat = out.flatten().astype(int)
    assert all(a <= b for a, b in zip(flat, flat[1:]))   # monotone mapping
    assert flat[0] < flat[-1]                            # and not collapsed
    _report(10, "window formula fixture (40->128 exact) + monotone ramp",
            time.monotonic() - t0, 2)
