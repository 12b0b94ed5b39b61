/** Typed client for the node's HTTP API.
 *
 * Every request the console makes goes through this class, and it only
 * speaks the documented /api/v1 endpoints. The bearer token lives in a
 * private field for the lifetime of the page — never in localStorage,
 * cookies, or URLs.
 */

import type {
  AggregateResponse,
  AuditResponse,
  CohortDoc,
  EncodedQuery,
  ErrorDoc,
  ExtensionDoc,
  FedJobDoc,
  InstancePage,
  LinkDoc,
  LoginResponse,
  PrincipalDoc,
  RunDoc,
  RunSummaryDoc,
  SeriesPage,
  StudyPage,
  WorkflowDoc,
} from "./types.js";
import type { MultipartBody } from "./multipart.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly errorCode: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (
  url: string,
  init: RequestInit,
) => Promise<Response>;

interface RequestOptions {
  query?: Record<string, string>;
  json?: unknown;
  raw?: MultipartBody;
  auth?: boolean;
}

export class ApiClient {
  /** Native private: invisible to JSON.stringify and enumeration. */
  #token: string | null = null;
  private principal: PrincipalDoc | null = null;

  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike =
      (url, init) => fetch(url, init),
  ) {}

  get loggedIn(): boolean {
    return this.#token !== null;
  }

  get currentPrincipal(): PrincipalDoc | null {
    return this.principal;
  }

  get isAdmin(): boolean {
    return this.principal?.roles.includes("admin") ?? false;
  }

  /** Drop the session from memory; there is nothing persisted to clear. */
  logout(): void {
    this.#token = null;
    this.principal = null;
  }

  private async request<T>(
    method: string,
    path: string,
    options: RequestOptions = {},
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (options.auth !== false) {
      if (this.#token === null) throw new ApiError(401, "no_session", "not logged in");
      headers["Authorization"] = `Bearer ${this.#token}`;
    }
    let body: BodyInit | undefined;
    if (options.json !== undefined) {
      headers["Content-Type"] = "application/json";
      body = JSON.stringify(options.json);
    } else if (options.raw !== undefined) {
      headers["Content-Type"] = options.raw.contentType;
      body = options.raw.body as unknown as BodyInit;
    }
    let url = this.baseUrl + path;
    if (options.query !== undefined) {
      const qs = new URLSearchParams(options.query).toString();
      if (qs !== "") url += `?${qs}`;
    }
    const response = await this.fetchFn(url, { method, headers, body });
    const text = await response.text();
    if (!response.ok) {
      let doc: Partial<ErrorDoc> = {};
      try {
        doc = JSON.parse(text) as ErrorDoc;
      } catch {
        // non-JSON error body: surface the status alone
      }
      throw new ApiError(response.status,
                         doc.error_code ?? "http_error",
                         doc.message ?? `HTTP ${response.status}`);
    }
    return JSON.parse(text) as T;
  }

  // -- session ---------------------------------------------------------------

  async login(username: string, password: string): Promise<PrincipalDoc> {
    const doc = await this.request<LoginResponse>(
      "POST", "/api/v1/login",
      { json: { username, password }, auth: false });
    this.#token = doc.token;
    this.principal = doc.principal;
    return doc.principal;
  }

  async whoami(): Promise<PrincipalDoc> {
    const doc = await this.request<{ principal: PrincipalDoc }>(
      "GET", "/api/v1/session");
    this.principal = doc.principal;
    return doc.principal;
  }

  // -- archive ---------------------------------------------------------------

  async uploadStudies(upload: MultipartBody): Promise<{ stored: string[]; count: number }> {
    return this.request("POST", "/api/v1/studies", { raw: upload });
  }

  async listInstances(query?: string): Promise<InstancePage> {
    return this.request("GET", "/api/v1/instances", {
      query: query ? { level: "instance", query } : { level: "instance" },
    });
  }

  async listSeries(query?: string): Promise<SeriesPage> {
    return this.request("GET", "/api/v1/instances", {
      query: query ? { level: "series", query } : { level: "series" },
    });
  }

  async listStudies(query?: string): Promise<StudyPage> {
    return this.request("GET", "/api/v1/instances", {
      query: query ? { level: "study", query } : { level: "study" },
    });
  }

  async aggregate(attr: string, query?: string): Promise<AggregateResponse> {
    return this.request("GET", "/api/v1/aggregate", {
      query: query ? { attr, query } : { attr },
    });
  }

  seriesPreviewUrl(seriesUid: string, maxEdge?: number): string {
    const suffix = maxEdge === undefined ? "" : `?max_edge=${maxEdge}`;
    return `${this.baseUrl}/api/v1/series/${seriesUid}/preview.png${suffix}`;
  }

  async applyTags(
    series: string[], add: string[], remove: string[],
  ): Promise<{ updated: number }> {
    return this.request("POST", "/api/v1/tags",
                        { json: { series, add, remove } });
  }

  async createCohort(name: string, query: EncodedQuery): Promise<CohortDoc> {
    return this.request("POST", "/api/v1/cohorts", { json: { name, query } });
  }

  async listCohorts(): Promise<{ cohorts: CohortDoc[] }> {
    return this.request("GET", "/api/v1/cohorts");
  }

  async getCohort(name: string): Promise<CohortDoc> {
    return this.request("GET", `/api/v1/cohorts/${encodeURIComponent(name)}`);
  }

  // -- workflows ---------------------------------------------------------------

  async listWorkflows(): Promise<{ workflows: WorkflowDoc[] }> {
    return this.request("GET", "/api/v1/workflows");
  }

  async launchRun(
    workflow: string, cohort: string, params: Record<string, unknown> = {},
  ): Promise<{ run_id: string }> {
    return this.request(
      "POST", `/api/v1/workflows/${encodeURIComponent(workflow)}/runs`,
      { json: { cohort, params } });
  }

  async listRuns(): Promise<{ runs: RunSummaryDoc[] }> {
    return this.request("GET", "/api/v1/runs");
  }

  async getRun(runId: string): Promise<RunDoc> {
    return this.request("GET", `/api/v1/runs/${encodeURIComponent(runId)}`);
  }

  async cancelRun(runId: string): Promise<RunDoc> {
    return this.request(
      "POST", `/api/v1/runs/${encodeURIComponent(runId)}/cancel`, { json: {} });
  }

  // -- extensions ---------------------------------------------------------------

  async listExtensions(): Promise<{ extensions: ExtensionDoc[] }> {
    return this.request("GET", "/api/v1/extensions");
  }

  async installExtension(
    upload: MultipartBody,
  ): Promise<{ installed: ExtensionDoc[] }> {
    return this.request("POST", "/api/v1/extensions", { raw: upload });
  }

  async uninstallExtension(name: string): Promise<{ removed: string }> {
    return this.request(
      "DELETE", `/api/v1/extensions/${encodeURIComponent(name)}`, { json: {} });
  }

  // -- federation ---------------------------------------------------------------

  async issueInvite(): Promise<{ invite_token: string }> {
    return this.request("POST", "/api/v1/federation/invites", { json: {} });
  }

  async createLink(endpoint: string, inviteToken: string): Promise<LinkDoc> {
    return this.request("POST", "/api/v1/federation/links",
                        { json: { endpoint, invite_token: inviteToken } });
  }

  async listLinks(): Promise<{ links: LinkDoc[] }> {
    return this.request("GET", "/api/v1/federation/links");
  }

  async createFedJob(job: {
    workflow: string;
    participants: string[];
    rounds: number;
    init_params: number[];
    lr?: number;
    quorum?: number;
  }): Promise<FedJobDoc> {
    return this.request("POST", "/api/v1/federation/jobs", { json: job });
  }

  async listFedJobs(): Promise<{ jobs: FedJobDoc[] }> {
    return this.request("GET", "/api/v1/federation/jobs");
  }

  async getFedJob(jobId: string): Promise<FedJobDoc> {
    return this.request(
      "GET", `/api/v1/federation/jobs/${encodeURIComponent(jobId)}`);
  }

  // -- audit (admin only) ----------------------------------------------------------

  async readAudit(after = 0, limit?: number): Promise<AuditResponse> {
    const query: Record<string, string> = { after: String(after) };
    if (limit !== undefined) query["limit"] = String(limit);
    return this.request("GET", "/api/v1/audit", { query });
  }
}
