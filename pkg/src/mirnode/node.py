"""The composition root: one ResearchNode wires every subsystem together.

Construction opens the database and registries but starts no sockets;
start() binds the HTTP gateway and the DIMSE listener, stop() tears both
down. Administrative commands can therefore operate on a node's state
without running servers.
"""
from __future__ import annotations

import logging
import time
import urllib.error
import urllib.request
import uuid
from pathlib import Path

from .archive import Archive, Database
from .config import NodeConfig
from .dicom import parse_part10
from .dimse import AssociationConfig, DimseServer
from .extensions import ExtensionManager, Registry, index_from_json
from .federation import FederationService
from .gateway import (
    AuditLog,
    Gateway,
    SessionStore,
    UserStore,
    start_http_server,
    stop_http_server,
)
from .workflow import (
    RUN_TERMINAL,
    WorkflowDefinition,
    WorkflowEngine,
    builtin_registry,
)

log = logging.getLogger("mirnode.node")

_META_SCHEMA = """
CREATE TABLE IF NOT EXISTS node_meta (
    key   TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
"""


def http_transport(endpoint: str, method: str, path: str,
                   headers: dict, body: bytes) -> tuple[int, bytes]:
    """Outbound federation transport over plain HTTP (urllib)."""
    request = urllib.request.Request(
        endpoint.rstrip("/") + path, data=body, method=method)
    for key, value in headers.items():
        request.add_header(key, value)
    if not request.has_header("Content-type"):
        request.add_header("Content-Type", "application/json")
    try:
        with urllib.request.urlopen(request, timeout=30) as response:
            return response.status, response.read()
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read()
    # URLError subclasses OSError, which the federation service maps to
    # EndpointUnreachable


class ResearchNode:
    def __init__(self, config: NodeConfig, clock=time.time):
        self.config = config
        data_dir = Path(config.data_dir)
        data_dir.mkdir(parents=True, exist_ok=True)

        self.db = Database(data_dir / "node.sqlite")
        self.db.ensure_schema(_META_SCHEMA)
        self.archive = Archive(self.db, data_dir / "blobs")
        self.operators = builtin_registry()
        self.engine = WorkflowEngine(
            self.archive, self.operators, data_dir / "runs",
            worker_count=config.worker_count or None)
        self.audit = AuditLog(self.db, clock=clock)
        self.users = UserStore(self.db)
        self.sessions = SessionStore(clock=clock)
        self.extensions = ExtensionManager(
            self.db, data_dir / "extensions",
            operator_registry=self.operators,
            registry=self._build_remote_registry(config.extension_index_url),
            active_workflows=self._active_workflow_names)

        instance_id = config.instance_id or self._persisted_instance_id()
        endpoint = config.public_endpoint or \
            f"http://{config.http_host}:{config.http_port}"
        self.federation = FederationService(
            instance_id, endpoint, self.db, engine=self.engine,
            clock=clock, audit=self._federation_audit)
        self.federation.set_transport(http_transport)

        self._registered: dict[str, tuple[WorkflowDefinition, str]] = {}
        self.gateway = Gateway(
            archive=self.archive, engine=self.engine,
            extensions=self.extensions, federation=self.federation,
            users=self.users, sessions=self.sessions, audit=self.audit,
            workflows=self.workflow_catalog)

        self._http_server = None
        self._dimse_server = None

    # -- lifecycle -----------------------------------------------------------------

    def start(self) -> None:
        self._http_server = start_http_server(
            self.config.http_host, self.config.http_port,
            self.gateway.handle)
        dimse_cfg = AssociationConfig(called_ae=self.config.ae_title)
        self._dimse_server = DimseServer(
            self.config.http_host, self.config.dimse_port, dimse_cfg,
            self._dimse_sink)
        self._dimse_server.start()
        if self.users.count() == 0:
            log.warning("no users exist; create one with: mirnode user add")
        log.info("node up: http=%s:%s dimse=%s ae=%s",
                 self.config.http_host, self.http_port, self.dimse_port,
                 self.config.ae_title)

    def stop(self) -> None:
        if self._http_server is not None:
            stop_http_server(self._http_server)
            self._http_server = None
        if self._dimse_server is not None:
            self._dimse_server.stop()
            self._dimse_server = None
        self.engine.shutdown()
        self.db.close()

    @property
    def http_port(self) -> int:
        if self._http_server is not None:
            return self._http_server.server_address[1]
        return self.config.http_port

    @property
    def dimse_port(self) -> int:
        if self._dimse_server is not None:
            return self._dimse_server.port
        return self.config.dimse_port

    # -- workflow catalog -------------------------------------------------------------

    def register_workflow(self, definition: WorkflowDefinition,
                          source: str = "builtin") -> None:
        if definition.name in self._registered:
            raise ValueError(f"workflow {definition.name!r} already registered")
        self._registered[definition.name] = (definition, source)

    def workflow_catalog(self) -> dict:
        catalog: dict[str, tuple[WorkflowDefinition, str]] = {}
        for workflow_name, extension in self.extensions.list_workflows():
            catalog[workflow_name] = (
                self.extensions.workflow(workflow_name),
                f"extension:{extension}")
        catalog.update(self._registered)
        return catalog

    def _active_workflow_names(self) -> set[str]:
        return {run.definition.name for run in self.engine.list_runs()
                if run.state not in RUN_TERMINAL}

    # -- wiring helpers ----------------------------------------------------------------

    def _dimse_sink(self, sop_uid: str, file_bytes: bytes) -> None:
        meta, ds = parse_part10(file_bytes)
        self.archive.ingest_instance(meta, ds, file_bytes)
        self.audit.append("system", "ingest", f"dimse:{sop_uid}", "allowed")

    def _federation_audit(self, message: str) -> None:
        self.audit.append("system", "federation", message, "denied")

    def _persisted_instance_id(self) -> str:
        row = self.db.query_one(
            "SELECT value FROM node_meta WHERE key = 'instance_id'")
        if row is not None:
            return row["value"]
        instance_id = uuid.uuid4().hex
        with self.db.tx() as conn:
            conn.execute(
                "INSERT OR IGNORE INTO node_meta (key, value)"
                " VALUES ('instance_id', ?)", (instance_id,))
        row = self.db.query_one(
            "SELECT value FROM node_meta WHERE key = 'instance_id'")
        return row["value"]

    @staticmethod
    def _build_remote_registry(index_url: str) -> Registry | None:
        if not index_url:
            return None
        with urllib.request.urlopen(index_url, timeout=30) as response:
            index = index_from_json(response.read())

        def fetch(url: str) -> bytes:
            with urllib.request.urlopen(url, timeout=60) as archive_response:
                return archive_response.read()

        return Registry(index, fetch)
