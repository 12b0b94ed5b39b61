"""The HTTP JSON API binding archive, workflows, extensions, and federation.

Audit policy: every state-mutating call appends exactly one audit event
(allowed on success, error on handler failure); read-only calls append none.
Authorization denials are audited inside AuthService, so a denied mutating
call still produces exactly one event. No response ever carries a password
hash, a shared link secret, or another principal's session token.
"""
from __future__ import annotations

import json
import logging
import mimetypes
import threading

from ..archive import (
    Archive,
    CohortQuery,
    DuplicateName,
    InvalidKey,
    InvalidTagName,
    MissingRequiredUid,
    NotFound,
    UidConflict,
    UnknownAttribute,
    UnknownCohort,
    UnknownSeries,
    query_from_json,
    query_to_json,
)
from ..archive import StorageFull as BlobStorageFull
from ..archive.query import Equals
from ..dicom import DicomError, parse_part10, render_preview
from ..extensions import (
    AlreadyInstalled,
    BadSemver,
    Conflict,
    DependencyCycle,
    DigestMismatch,
    ExtensionInUse,
    ExtensionManager,
    NotInRegistry,
    NotInstalled,
    PathEscape,
    SanityCheckFailed,
    SchemaError,
    UnsatisfiableConstraint,
    check_relative_path,
)
from ..federation import (
    EndpointUnreachable,
    FederationService,
    GuardViolation,
    InviteAlreadyUsed,
    InviteExpired,
    ParticipantRejected,
    QuorumNotMet,
    UnknownJob,
    UnknownLink,
)
from ..workflow import (
    InvalidTransition,
    UnknownRun,
    WorkflowEngine,
    WorkflowError,
    WorkflowRun,
    plan_execution,
)
from .auth import AuthService, SessionStore, UserStore
from .audit import AuditLog
from .errors import (
    AccountDisabled,
    AuthExpired,
    InvalidCredentials,
    InvalidToken,
    PermissionDenied,
    StorageFull,
    UnknownUser,
    UserExists,
)
from .http import Request, Response, Router, error_response, json_response
from .multipart import parse_multipart

log = logging.getLogger("mirnode.gateway")

_STATUS_BY_ERROR: dict[type, int] = {
    InvalidCredentials: 401,
    InvalidToken: 401,
    AuthExpired: 401,
    AccountDisabled: 403,
    PermissionDenied: 403,
    UserExists: 409,
    UnknownUser: 404,
    StorageFull: 507,
    BlobStorageFull: 507,
    NotFound: 404,
    UnknownCohort: 404,
    UnknownSeries: 404,
    UnknownAttribute: 400,
    InvalidTagName: 400,
    InvalidKey: 400,
    DuplicateName: 409,
    UidConflict: 409,
    MissingRequiredUid: 400,
    DicomError: 400,
    UnknownRun: 404,
    InvalidTransition: 409,
    WorkflowError: 400,
    NotInstalled: 404,
    AlreadyInstalled: 409,
    Conflict: 409,
    ExtensionInUse: 409,
    SchemaError: 400,
    BadSemver: 400,
    PathEscape: 400,
    DigestMismatch: 400,
    NotInRegistry: 404,
    UnsatisfiableConstraint: 409,
    DependencyCycle: 409,
    SanityCheckFailed: 400,
    UnknownLink: 404,
    UnknownJob: 404,
    InviteExpired: 403,
    InviteAlreadyUsed: 409,
    GuardViolation: 403,
    EndpointUnreachable: 502,
    ParticipantRejected: 502,
    QuorumNotMet: 502,
    ValueError: 400,
}


def _snake(name: str) -> str:
    out = []
    for i, ch in enumerate(name):
        if ch.isupper() and i and (not name[i - 1].isupper()
                                   or (i + 1 < len(name)
                                       and name[i + 1].islower())):
            out.append("_")
        out.append(ch.lower())
    return "".join(out)


def _error_to_response(exc: Exception) -> Response:
    for klass in type(exc).__mro__:
        if klass in _STATUS_BY_ERROR:
            return error_response(_STATUS_BY_ERROR[klass],
                                  _snake(type(exc).__name__), str(exc))
    log.exception("unhandled API error", exc_info=exc)
    return error_response(500, "internal_error", "internal error")


class Gateway:
    """All routes; construct once per node, dispatch many times."""

    def __init__(self, *, archive: Archive, engine: WorkflowEngine,
                 extensions: ExtensionManager,
                 federation: FederationService | None,
                 users: UserStore, sessions: SessionStore, audit: AuditLog,
                 workflows=None):
        self.archive = archive
        self.engine = engine
        self.extensions = extensions
        self.federation = federation
        self.users = users
        self.audit = audit
        self.auth = AuthService(users, sessions, audit)
        self._workflows_fn = workflows or self._extension_workflows
        self.router = Router()
        self._register_routes()

    # -- plumbing ---------------------------------------------------------------

    def handle(self, request: Request) -> Response:
        try:
            return self.router.dispatch(request)
        except Exception as exc:  # uniform {error_code, message} bodies
            return _error_to_response(exc)

    def _reading(self, action: str, handler):
        def wrapped(request: Request) -> Response:
            request.principal = self.auth.authorize(
                request.token, action, resource=request.path)
            return handler(request)
        return wrapped

    def _mutating(self, action: str, handler):
        def wrapped(request: Request) -> Response:
            principal = self.auth.authorize(
                request.token, action, resource=request.path)
            request.principal = principal
            try:
                response = handler(request)
            except Exception:
                self.audit.append(principal.id, action, request.path, "error")
                raise
            self.audit.append(principal.id, action, request.path, "allowed")
            return response
        return wrapped

    def _register_routes(self) -> None:
        add = self.router.add
        add("POST", "/api/v1/login", self._login)
        add("GET", "/api/v1/session", self._session)
        add("POST", "/api/v1/users",
            self._mutating("manage_users", self._create_user))
        add("GET", "/api/v1/users",
            self._reading("manage_users", self._list_users))
        add("POST", "/api/v1/studies",
            self._mutating("ingest", self._upload_studies))
        add("GET", "/api/v1/instances",
            self._reading("query", self._query_instances))
        add("GET", "/api/v1/aggregate",
            self._reading("query", self._aggregate))
        add("GET", "/api/v1/series/{uid}/preview.png",
            self._reading("view", self._series_preview))
        add("POST", "/api/v1/tags", self._mutating("tag", self._apply_tags))
        add("POST", "/api/v1/cohorts",
            self._mutating("tag", self._create_cohort))
        add("GET", "/api/v1/cohorts",
            self._reading("view", self._list_cohorts))
        add("GET", "/api/v1/cohorts/{name}",
            self._reading("view", self._get_cohort))
        add("GET", "/api/v1/workflows",
            self._reading("view", self._list_workflows))
        add("POST", "/api/v1/workflows/{name}/runs",
            self._mutating("run_workflow", self._launch_run))
        add("GET", "/api/v1/runs", self._reading("view", self._list_runs))
        add("GET", "/api/v1/runs/{run_id}",
            self._reading("view", self._get_run))
        add("POST", "/api/v1/runs/{run_id}/cancel",
            self._mutating("run_workflow", self._cancel_run))
        add("GET", "/api/v1/extensions",
            self._reading("view", self._list_extensions))
        add("POST", "/api/v1/extensions",
            self._mutating("manage_extensions", self._install_extension))
        add("DELETE", "/api/v1/extensions/{name}",
            self._mutating("manage_extensions", self._uninstall_extension))
        add("GET", "/api/v1/extensions/{name}/ui/{asset*}",
            self._reading("view", self._extension_asset))
        add("POST", "/api/v1/federation/invites",
            self._mutating("manage_federation", self._issue_invite))
        add("POST", "/api/v1/federation/links",
            self._mutating("manage_federation", self._create_link))
        add("GET", "/api/v1/federation/links",
            self._reading("view", self._list_links))
        add("POST", "/api/v1/federation/jobs",
            self._mutating("manage_federation", self._create_fed_job))
        add("GET", "/api/v1/federation/jobs",
            self._reading("view", self._list_fed_jobs))
        add("GET", "/api/v1/federation/jobs/{job_id}",
            self._reading("view", self._get_fed_job))
        add("GET", "/api/v1/audit", self._read_audit)
        if self.federation is not None:
            self.router.mount("/fed/v1", self._fed_dispatch)

    # -- auth -------------------------------------------------------------------

    def _login(self, request: Request) -> Response:
        doc = request.json()
        username = doc.get("username")
        password = doc.get("password")
        if not isinstance(username, str) or not isinstance(password, str):
            raise ValueError("username and password required")
        session, principal = self.auth.login(username, password)
        return json_response({
            "token": session.token,
            "expires_at": session.expires_at,
            "principal": principal.to_public_json(),
        })

    def _session(self, request: Request) -> Response:
        principal = self.auth.authenticate(request.token,
                                           resource=request.path)
        return json_response({"principal": principal.to_public_json()})

    def _create_user(self, request: Request) -> Response:
        doc = request.json()
        username = doc.get("username")
        password = doc.get("password")
        roles = doc.get("roles")
        if not isinstance(username, str) or not isinstance(password, str) \
                or not isinstance(roles, list):
            raise ValueError("username, password, and roles required")
        principal = self.users.add_user(username, password, roles)
        return json_response(principal.to_public_json(), status=201)

    def _list_users(self, request: Request) -> Response:
        return json_response(
            {"users": [p.to_public_json() for p in self.users.list_users()]})

    # -- archive ------------------------------------------------------------------

    def _upload_studies(self, request: Request) -> Response:
        content_type = request.headers.get("content-type", "")
        if "multipart/" in content_type.lower():
            try:
                parts = parse_multipart(content_type, request.body)
            except ValueError as exc:
                raise ValueError(f"bad multipart body: {exc}") from exc
            blobs = [p.data for p in parts if p.filename is not None]
        else:
            blobs = [request.body] if request.body else []
        if not blobs:
            raise ValueError("no files in upload")
        stored = []
        for raw in blobs:
            meta, ds = parse_part10(raw)
            record = self.archive.ingest_instance(meta, ds, raw)
            stored.append(record.sop_instance_uid)
        return json_response({"stored": stored, "count": len(stored)},
                             status=201)

    def _parse_query(self, request: Request) -> CohortQuery:
        encoded = request.first_query("query")
        if not encoded:
            return CohortQuery()
        try:
            doc = json.loads(encoded)
        except json.JSONDecodeError as exc:
            raise ValueError(f"query is not valid JSON: {exc}") from exc
        return query_from_json(doc)

    def _query_instances(self, request: Request) -> Response:
        level = request.first_query("level", "instance")
        if level not in ("instance", "series", "study"):
            raise ValueError(f"unknown level {level!r}")
        q = self._parse_query(request)
        items = self.archive.query_index(q, level)
        if level == "instance":
            docs = [_instance_doc(r) for r in items]
        elif level == "series":
            docs = [_series_doc(r) for r in items]
        else:
            docs = [_study_doc(r) for r in items]
        return json_response({"level": level, "count": len(docs),
                              "items": docs})

    def _aggregate(self, request: Request) -> Response:
        attr = request.first_query("attr")
        if not attr:
            raise ValueError("attr parameter required")
        q = self._parse_query(request)
        values = self.archive.aggregate_values(attr, q)
        return json_response({"attr": attr, "values": values,
                              "total": sum(values.values())})

    def _series_preview(self, request: Request) -> Response:
        uid = request.params["uid"]
        raw_edge = request.first_query("max_edge", "256")
        try:
            max_edge = int(raw_edge)
        except ValueError:
            raise ValueError(f"max_edge must be an integer, got {raw_edge!r}")
        max_edge = max(16, min(max_edge, 2048))
        rollups = self.archive.query_index(
            CohortQuery((Equals("SeriesInstanceUID", uid),)), "series")
        if not rollups:
            raise UnknownSeries(uid)
        sop_uid = rollups[0].representative.sop_instance_uid
        _, ds = parse_part10(self.archive.get_instance_bytes(sop_uid))
        png = render_preview(ds, max_edge)
        return Response(200, png, content_type="image/png")

    def _apply_tags(self, request: Request) -> Response:
        doc = request.json()
        series = doc.get("series")
        if not isinstance(series, list) or not series:
            raise ValueError("series must be a non-empty list")
        add = doc.get("add", [])
        remove = doc.get("remove", [])
        if not isinstance(add, list) or not isinstance(remove, list):
            raise ValueError("add and remove must be lists")
        updated = self.archive.apply_tags(list(series), set(add), set(remove))
        return json_response({"updated": updated})

    def _create_cohort(self, request: Request) -> Response:
        doc = request.json()
        name = doc.get("name")
        if not isinstance(name, str):
            raise ValueError("cohort name required")
        q = query_from_json(doc["query"]) if "query" in doc else CohortQuery()
        cohort = self.archive.create_cohort(
            name, q, created_by=request.principal.username)
        return json_response(_cohort_doc(cohort), status=201)

    def _list_cohorts(self, request: Request) -> Response:
        return json_response({"cohorts": [
            _cohort_doc(c) for c in self.archive.list_cohorts()]})

    def _get_cohort(self, request: Request) -> Response:
        cohort = self.archive.get_cohort(request.params["name"])
        return json_response(_cohort_doc(cohort))

    # -- workflows ---------------------------------------------------------------

    def _extension_workflows(self):
        catalog = {}
        for workflow_name, extension in self.extensions.list_workflows():
            catalog[workflow_name] = (self.extensions.workflow(workflow_name),
                                      f"extension:{extension}")
        return catalog

    def _list_workflows(self, request: Request) -> Response:
        docs = []
        for name, (defn, source) in sorted(self._workflows_fn().items()):
            docs.append({
                "name": name,
                "source": source,
                "version": defn.version,
                "retry_limit": defn.retry_limit,
                "nodes": [
                    {"id": node.id, "operator": node.operator,
                     "params": dict(node.params),
                     "inputs": [{"from_node": b.from_node, "slot": b.slot}
                                for b in node.inputs]}
                    for node in defn.nodes
                ],
            })
        return json_response({"workflows": docs})

    def _launch_run(self, request: Request) -> Response:
        name = request.params["name"]
        catalog = self._workflows_fn()
        if name not in catalog:
            raise NotFound(f"no workflow named {name!r}")
        defn, _ = catalog[name]
        doc = request.json()
        cohort = doc.get("cohort", "")
        if not isinstance(cohort, str):
            raise ValueError("cohort must be a string")
        run_params = doc.get("params", {})
        if not isinstance(run_params, dict):
            raise ValueError("params must be an object")
        run_id = self.engine.submit(defn, cohort,
                                    request.principal.username,
                                    run_params=run_params or None)
        return json_response({"run_id": run_id}, status=201)

    def _list_runs(self, request: Request) -> Response:
        return json_response({"runs": [
            _run_summary(run) for run in self.engine.list_runs()]})

    def _get_run(self, request: Request) -> Response:
        run = self.engine.get_run(request.params["run_id"])
        return json_response(_run_doc(run))

    def _cancel_run(self, request: Request) -> Response:
        run = self.engine.cancel(request.params["run_id"])
        return json_response(_run_doc(run))

    # -- extensions ---------------------------------------------------------------

    def _list_extensions(self, request: Request) -> Response:
        return json_response({"extensions": [
            rec.to_json() for rec in self.extensions.list_installed()]})

    def _install_extension(self, request: Request) -> Response:
        content_type = request.headers.get("content-type", "")
        if "multipart/" in content_type.lower():
            parts = parse_multipart(content_type, request.body)
            files = [p.data for p in parts if p.filename is not None]
            if len(files) != 1:
                raise ValueError("exactly one archive file expected")
            data = files[0]
        else:
            data = request.body
        if not data:
            raise ValueError("empty archive upload")
        records = self.extensions.install_upload(data)
        return json_response(
            {"installed": [rec.to_json() for rec in records]}, status=201)

    def _uninstall_extension(self, request: Request) -> Response:
        name = request.params["name"]
        self.extensions.uninstall(name)
        return json_response({"removed": name})

    def _extension_asset(self, request: Request) -> Response:
        name = request.params["name"]
        asset = request.params["asset"]
        check_relative_path(asset)
        root = self.extensions.ui_root(name)
        if root is None:
            raise NotInstalled(f"{name} has no UI assets")
        target = root / asset
        if not target.is_file():
            raise NotFound(f"{name}: {asset}")
        guessed, _ = mimetypes.guess_type(asset)
        return Response(200, target.read_bytes(),
                        content_type=guessed or "application/octet-stream")

    # -- federation ---------------------------------------------------------------

    def _require_federation(self) -> FederationService:
        if self.federation is None:
            raise NotFound("federation is not configured on this node")
        return self.federation

    def _issue_invite(self, request: Request) -> Response:
        token = self._require_federation().issue_invite()
        return json_response({"invite_token": token}, status=201)

    def _create_link(self, request: Request) -> Response:
        doc = request.json()
        endpoint = doc.get("endpoint")
        token = doc.get("invite_token")
        if not isinstance(endpoint, str) or not isinstance(token, str):
            raise ValueError("endpoint and invite_token required")
        link = self._require_federation().link_to(endpoint, token)
        return json_response(link.to_public_json(), status=201)

    def _list_links(self, request: Request) -> Response:
        service = self._require_federation()
        return json_response({"links": [
            link.to_public_json() for link in service.links.list_links()]})

    def _create_fed_job(self, request: Request) -> Response:
        service = self._require_federation()
        doc = request.json()
        workflow = doc.get("workflow")
        participants = doc.get("participants")
        rounds = doc.get("rounds")
        init_params = doc.get("init_params")
        if not isinstance(workflow, str) or not isinstance(participants, list) \
                or not isinstance(rounds, int) \
                or not isinstance(init_params, list):
            raise ValueError("workflow, participants, rounds, and"
                             " init_params required")
        job = service.create_job(
            workflow, participants, rounds,
            lr=float(doc.get("lr", 0.1)),
            init_params=[float(v) for v in init_params],
            quorum=doc.get("quorum"))

        def runner():
            try:
                service.run_job(job.job_id)
            except Exception as exc:
                self.audit.append(
                    "system", "federation",
                    f"job {job.job_id}: {type(exc).__name__}: {exc}", "error")

        threading.Thread(target=runner, daemon=True,
                         name=f"fed-job-{job.job_id[:8]}").start()
        return json_response(job.to_json(), status=202)

    def _list_fed_jobs(self, request: Request) -> Response:
        service = self._require_federation()
        return json_response(
            {"jobs": [job.to_json() for job in service.list_jobs()]})

    def _get_fed_job(self, request: Request) -> Response:
        job = self._require_federation().get_job(request.params["job_id"])
        return json_response(job.to_json())

    def _fed_dispatch(self, request: Request) -> Response:
        status, body = self.federation.dispatch(
            request.method, request.path, request.headers, request.body)
        return Response(status, body)

    # -- audit ----------------------------------------------------------------------

    def _read_audit(self, request: Request) -> Response:
        self.auth.require_admin(request.token, resource=request.path)
        try:
            after = int(request.first_query("after", "0"))
            limit_text = request.first_query("limit", "")
            limit = int(limit_text) if limit_text else None
        except ValueError:
            raise ValueError("after and limit must be integers")
        events = self.audit.events(after_seq=after, limit=limit)
        return json_response({
            "events": [e.to_json() for e in events],
            "first_invalid": self.audit.verify(),
        })


# -- document shapes -----------------------------------------------------------------


def _instance_doc(record) -> dict:
    return {
        "sop_uid": record.sop_instance_uid,
        "series_uid": record.series_instance_uid,
        "study_uid": record.study_instance_uid,
        "patient_id": record.patient_id,
        "attrs": dict(record.indexed_attributes),
        "sha256": record.content_sha256,
        "size": record.size,
        "received_at": record.received_at,
        "tags": sorted(record.user_tags),
    }


def _series_doc(rollup) -> dict:
    return {
        "series_uid": rollup.series_uid,
        "study_uid": rollup.study_uid,
        "instance_count": rollup.instance_count,
        "tags": sorted(rollup.user_tags),
        "representative": _instance_doc(rollup.representative),
        "preview_url": f"/api/v1/series/{rollup.series_uid}/preview.png",
    }


def _study_doc(rollup) -> dict:
    return {
        "study_uid": rollup.study_uid,
        "series_count": rollup.series_count,
        "instance_count": rollup.instance_count,
        "representative": _instance_doc(rollup.representative),
    }


def _cohort_doc(cohort) -> dict:
    return {
        "name": cohort.name,
        "series": list(cohort.series_uids),
        "series_count": len(cohort.series_uids),
        "query": query_to_json(cohort.origin_query),
        "created_at": cohort.created_at,
        "created_by": cohort.created_by,
    }


def _run_summary(run: WorkflowRun) -> dict:
    return {
        "run_id": run.run_id,
        "workflow": run.definition.name,
        "cohort": run.cohort,
        "initiated_by": run.initiated_by,
        "state": run.state,
        "created_at": run.created_at,
    }


def _run_doc(run: WorkflowRun) -> dict:
    doc = _run_summary(run)
    doc["cancel_requested"] = run.cancel_requested
    doc["nodes"] = [
        {
            "id": node.id,
            "operator": node.operator,
            "state": run.node_states[node.id].state,
            "attempts": run.node_states[node.id].attempts,
            "started_at": run.node_states[node.id].started_at,
            "ended_at": run.node_states[node.id].ended_at,
            "error": run.node_states[node.id].error,
        }
        for node in run.definition.nodes
    ]
    doc["stages"] = [list(stage)
                     for stage in plan_execution(run.definition).stages]
    return doc
