#!/usr/bin/env python3
"""Record live API responses as console test fixtures.

Boots a throwaway node on a random port, populates a small corpus through
the public HTTP API, and writes the exact JSON bodies (and one exact
multipart request body) the server exchanged into frontend/tests/fixtures/.
The console's unit tests then run against real recorded traffic instead of
hand-typed approximations.

Also replays a workflow run through the scheduler's pure state machine and
captures the gateway's serialization of every intermediate state, giving
the run-monitor tests a poll-by-poll trace produced by the same code that
serves GET /runs/{id}.

The only edit applied to any recording: the login response's bearer token
is replaced with a placeholder, so no live credential — even a dead one
from a throwaway node — is ever committed.

The multipart body is built with the same derivation the console uses
(parts sorted by filename and content digest, boundary from a digest of
the parts). Recording it alongside the server's 201 response proves those
exact bytes are accepted; the console test rebuilds them and compares
byte-for-byte.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import random
import sys
import tempfile
import urllib.error
import urllib.parse
import urllib.request
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

from gen_dicom import random_instance  # noqa: E402
from mirnode.config import NodeConfig  # noqa: E402
from mirnode.dicom import serialize_part10  # noqa: E402
from mirnode.gateway.api import _run_doc  # noqa: E402
from mirnode.node import ResearchNode  # noqa: E402
from mirnode.workflow import (  # noqa: E402
    InputBinding,
    WorkflowDefinition,
    WorkflowNode,
)
from mirnode.workflow import run as runsm  # noqa: E402

PLACEHOLDER_TOKEN = "fixture-token-placeholder"


# -- deterministic multipart (mirror of the console builder) ---------------------


def _sanitize(name: str) -> str:
    return name.replace('"', "%22").replace("\r", "").replace("\n", "")


def build_multipart(files: list[tuple[str, bytes]]) -> tuple[bytes, str]:
    parts = sorted(
        ((_sanitize(n), d, hashlib.sha256(d).hexdigest()) for n, d in files),
        key=lambda p: (p[0], p[2]))
    material = b"".join(
        n.encode() + b"\x00" + d + b"\x00" for n, d, _ in parts)
    seed = hashlib.sha256(material).hexdigest()
    boundary = f"----upload-{seed[:24]}"

    def collides(b: str) -> bool:
        needle = b.encode()
        return any(needle in d or needle in n.encode() for n, d, _ in parts)

    while collides(boundary):
        seed = hashlib.sha256(seed.encode()).hexdigest()
        boundary = f"----upload-{seed[:24]}"

    body = b""
    for n, d, _ in parts:
        body += (f"--{boundary}\r\n"
                 f'Content-Disposition: form-data; name="file";'
                 f' filename="{n}"\r\n'
                 f"Content-Type: application/octet-stream\r\n\r\n").encode()
        body += d + b"\r\n"
    body += f"--{boundary}--\r\n".encode()
    return body, f"multipart/form-data; boundary={boundary}"


# -- tiny HTTP client ------------------------------------------------------------


class Client:
    def __init__(self, base: str):
        self.base = base
        self.token: str | None = None

    def call(self, method: str, path: str, *, payload=None, raw=None,
             content_type=None) -> tuple[int, bytes]:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        data = raw
        if payload is not None:
            data = json.dumps(payload).encode()
            headers["Content-Type"] = "application/json"
        elif content_type:
            headers["Content-Type"] = content_type
        request = urllib.request.Request(self.base + path, data=data,
                                         headers=headers, method=method)
        try:
            with urllib.request.urlopen(request, timeout=30) as resp:
                return resp.status, resp.read()
        except urllib.error.HTTPError as exc:
            return exc.code, exc.read()

    def json(self, method: str, path: str, **kw) -> dict:
        status, body = self.call(method, path, **kw)
        if status >= 400:
            raise RuntimeError(f"{method} {path} -> {status}: {body!r}")
        return json.loads(body)


# -- corpus ----------------------------------------------------------------------


def make_corpus(rng: random.Random) -> list[tuple[str, bytes]]:
    """Ten instances across five series, varied enough for every panel."""
    plan = [
        ("P001", "CT", "20240110", "1.2.840.99990.1", "1.2.840.99990.1.1"),
        ("P001", "CT", "20240110", "1.2.840.99990.1", "1.2.840.99990.1.2"),
        ("P002", "MR", "20240315", "1.2.840.99990.2", "1.2.840.99990.2.1"),
        ("P003", "CT", "20240322", "1.2.840.99990.3", "1.2.840.99990.3.1"),
        ("P003", "MR", "20240401", "1.2.840.99990.4", "1.2.840.99990.4.1"),
    ]
    files: list[tuple[str, bytes]] = []
    counter = 0
    for patient, modality, date, study, series in plan:
        for _ in range(2):
            meta, ds = random_instance(
                rng, patient_id=patient, modality=modality, study_date=date,
                study_uid=study, series_uid=series)
            counter += 1
            files.append((f"img-{counter:03d}.dcm", serialize_part10(meta, ds)))
    return files


# -- scripted run traces -----------------------------------------------------------


def diamond_definition() -> WorkflowDefinition:
    return WorkflowDefinition("demo-flow", "1.0.0", (
        WorkflowNode("fetch", "load_table",
                     params={"bucket": "datasets", "key": "demo.csv"}),
        WorkflowNode("stats", "table_stats",
                     inputs=(InputBinding("fetch", "table"),)),
        WorkflowNode("echo", "identity",
                     inputs=(InputBinding("fetch", "table"),)),
        WorkflowNode("join", "merge_params",
                     inputs=(InputBinding("stats", "params"),
                             InputBinding("echo", "params"))),
    ), retry_limit=1)


def scripted_trace(events_per_poll: list[list]) -> list[dict]:
    """Apply event batches to a fresh run; snapshot the doc after each."""
    run = runsm.new_run("run-fixture-0001", diamond_definition(), "demo",
                        "researcher", created_at="2026-08-25T12:00:00Z")
    polls = [_run_doc(run)]
    for batch in events_per_poll:
        for event in batch:
            run = runsm.advance_run(run, event)
        polls.append(_run_doc(run))
    return polls


def retry_trace() -> list[dict]:
    t = [f"2026-08-25T12:00:{s:02d}Z" for s in range(20)]
    e = runsm
    return scripted_trace([
        [e.NodeStarted("fetch", t[1])],
        [e.NodeFinished("fetch", "succeeded", t[2])],
        [e.NodeStarted("stats", t[3]), e.NodeStarted("echo", t[3])],
        [e.NodeFinished("stats", "failed", t[4], error="transient I/O error")],
        [e.RetryTimer("stats", t[5])],
        [e.NodeStarted("stats", t[6])],
        [e.NodeFinished("stats", "succeeded", t[7]),
         e.NodeFinished("echo", "succeeded", t[7])],
        [e.NodeStarted("join", t[8])],
        [e.NodeFinished("join", "succeeded", t[9])],
    ])


def failure_trace() -> list[dict]:
    t = [f"2026-08-25T13:00:{s:02d}Z" for s in range(20)]
    e = runsm
    return scripted_trace([
        [e.NodeStarted("fetch", t[1])],
        [e.NodeFinished("fetch", "succeeded", t[2])],
        [e.NodeStarted("stats", t[3]), e.NodeStarted("echo", t[3])],
        [e.NodeFinished("stats", "failed", t[4], error="bad input")],
        [e.RetryTimer("stats", t[5])],
        [e.NodeStarted("stats", t[6])],
        [e.NodeFinished("stats", "failed", t[7], error="bad input again")],
        [e.NodeFinished("echo", "succeeded", t[8])],
    ])


# -- main ------------------------------------------------------------------------


def record(out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    def write_json(name: str, doc) -> None:
        (out_dir / name).write_text(json.dumps(doc, indent=2, sort_keys=True)
                                    + "\n")
        written.append(name)

    def write_bytes(name: str, data: bytes) -> None:
        (out_dir / name).write_bytes(data)
        written.append(name)

    with tempfile.TemporaryDirectory() as tmp:
        node = ResearchNode(NodeConfig(data_dir=f"{tmp}/node",
                                       http_port=0, dimse_port=0))
        node.users.add_user("admin", "fixture-admin-pw", {"admin"})
        node.users.add_user("researcher", "fixture-research-pw",
                            {"researcher"})

        # a runnable workflow backed by a small object-store table
        node.archive.store_object("datasets", "demo.csv", "text/csv",
                                  b"x,y\n1,2\n3,4\n")
        node.register_workflow(WorkflowDefinition("demo-flow", "1.0.0", (
            WorkflowNode("fetch", "load_table",
                         params={"bucket": "datasets", "key": "demo.csv"}),
        )))
        node.start()
        try:
            base = f"http://127.0.0.1:{node.http_port}"
            client = Client(base)

            login = client.json("POST", "/api/v1/login", payload={
                "username": "researcher", "password": "fixture-research-pw"})
            client.token = login["token"]
            login["token"] = PLACEHOLDER_TOKEN
            write_json("login.json", login)

            # -- upload: exact bytes plus the server's 201 -------------------
            files = make_corpus(random.Random(42))
            body, content_type = build_multipart(files)
            status, response = client.call(
                "POST", "/api/v1/studies", raw=body,
                content_type=content_type)
            if status != 201:
                raise RuntimeError(f"upload failed: {status} {response!r}")
            write_bytes("upload_body.bin", body)
            for name, data in files:
                write_bytes(name.replace(".dcm", ".bin"), data)
            write_json("upload_manifest.json", {
                "content_type": content_type,
                "files": [{"name": n, "path": n.replace(".dcm", ".bin")}
                          for n, _ in files],
                "response_status": status,
                "response": json.loads(response),
            })

            # -- curation state the gallery fixtures will show ----------------
            client.json("POST", "/api/v1/tags", payload={
                "series": ["1.2.840.99990.1.1", "1.2.840.99990.2.1"],
                "add": ["reviewed"], "remove": []})
            client.json("POST", "/api/v1/tags", payload={
                "series": ["1.2.840.99990.4.1"],
                "add": ["training_set"], "remove": []})

            write_json("series_page.json",
                       client.json("GET", "/api/v1/instances?level=series"))
            miss = json.dumps({"predicates": [
                {"kind": "equals", "attr": "PatientID", "value": "P999"}]})
            write_json("series_empty.json", client.json(
                "GET", "/api/v1/instances?level=series&query="
                + urllib.parse.quote(miss)))
            write_json("aggregate_modality.json",
                       client.json("GET", "/api/v1/aggregate?attr=Modality"))
            write_json("workflows.json",
                       client.json("GET", "/api/v1/workflows"))

            # -- one real run, observed to completion -------------------------
            launched = client.json("POST", "/api/v1/workflows/demo-flow/runs",
                                   payload={"cohort": ""})
            node.engine.wait(launched["run_id"], timeout=30)
            write_json("run_live.json", client.json(
                "GET", f"/api/v1/runs/{launched['run_id']}"))
            write_json("runs_list.json", client.json("GET", "/api/v1/runs"))

            admin = Client(base)
            admin.token = admin.json("POST", "/api/v1/login", payload={
                "username": "admin", "password": "fixture-admin-pw"})["token"]
            write_json("audit.json", admin.json("GET", "/api/v1/audit"))
        finally:
            node.stop()

    # -- scripted scheduler traces (pure state machine, no server) -----------
    write_json("run_trace.json", {
        "note": "poll-by-poll documents for a run whose 'stats' node fails "
                "once and succeeds on retry",
        "polls": retry_trace(),
    })
    write_json("run_failure_trace.json", {
        "note": "poll-by-poll documents for a run whose 'stats' node "
                "exhausts its retry; 'join' is skipped",
        "polls": failure_trace(),
    })

    for name in written:
        print(f"wrote {out_dir / name}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--out", default=str(REPO / "frontend" / "tests" / "fixtures"),
        help="fixture output directory")
    args = parser.parse_args()
    record(Path(args.out))


if __name__ == "__main__":
    main()
