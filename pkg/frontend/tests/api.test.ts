/** ApiClient: documented endpoints only, bearer discipline, token hygiene. */

import { describe, expect, it } from "vitest";
import { ApiClient, ApiError, type FetchLike } from "../src/api.js";
import { buildMultipart } from "../src/multipart.js";

/** Every URL path the console is allowed to touch. */
const DOCUMENTED_ROUTES: [string, RegExp][] = [
  ["POST", /^\/api\/v1\/login$/],
  ["GET", /^\/api\/v1\/session$/],
  ["POST", /^\/api\/v1\/studies$/],
  ["GET", /^\/api\/v1\/instances(\?.*)?$/],
  ["GET", /^\/api\/v1\/aggregate\?.*$/],
  ["GET", /^\/api\/v1\/series\/[^/]+\/preview\.png(\?.*)?$/],
  ["POST", /^\/api\/v1\/tags$/],
  ["POST", /^\/api\/v1\/cohorts$/],
  ["GET", /^\/api\/v1\/cohorts$/],
  ["GET", /^\/api\/v1\/cohorts\/[^/]+$/],
  ["GET", /^\/api\/v1\/workflows$/],
  ["POST", /^\/api\/v1\/workflows\/[^/]+\/runs$/],
  ["GET", /^\/api\/v1\/runs$/],
  ["GET", /^\/api\/v1\/runs\/[^/]+$/],
  ["POST", /^\/api\/v1\/runs\/[^/]+\/cancel$/],
  ["GET", /^\/api\/v1\/extensions$/],
  ["POST", /^\/api\/v1\/extensions$/],
  ["DELETE", /^\/api\/v1\/extensions\/[^/]+$/],
  ["POST", /^\/api\/v1\/federation\/invites$/],
  ["POST", /^\/api\/v1\/federation\/links$/],
  ["GET", /^\/api\/v1\/federation\/links$/],
  ["POST", /^\/api\/v1\/federation\/jobs$/],
  ["GET", /^\/api\/v1\/federation\/jobs$/],
  ["GET", /^\/api\/v1\/federation\/jobs\/[^/]+$/],
  ["GET", /^\/api\/v1\/audit\?.*$/],
];

interface Captured {
  method: string;
  url: string;
  headers: Record<string, string>;
}

function recordingFetch(
  log: Captured[],
  body: (url: string) => unknown = () => ({}),
): FetchLike {
  return async (url, init) => {
    log.push({
      method: init.method ?? "GET",
      url,
      headers: { ...(init.headers as Record<string, string>) },
    });
    return new Response(JSON.stringify(body(url)), {
      status: 200,
      headers: { "Content-Type": "application/json" },
    });
  };
}

const TOKEN = "tok-abcdef0123456789";

function loginBody(url: string): unknown {
  if (url.endsWith("/login")) {
    return {
      token: TOKEN,
      expires_at: 1_791_000_000,
      principal: { id: "p1", username: "u", roles: ["researcher"],
                   disabled: false, created_at: "t" },
    };
  }
  return { ok: true, principal: { id: "p1", username: "u", roles: ["admin"],
                                  disabled: false, created_at: "t" },
           runs: [], workflows: [], cohorts: [], links: [], jobs: [],
           extensions: [], events: [], first_invalid: null };
}

async function exerciseEverything(client: ApiClient): Promise<void> {
  await client.login("u", "pw");
  await client.whoami();
  const upload = await buildMultipart(
    [{ name: "x.dcm", data: new Uint8Array([1]) }]);
  await client.uploadStudies(upload);
  await client.listInstances();
  await client.listSeries('{"predicates":[]}');
  await client.listStudies();
  await client.aggregate("Modality", '{"predicates":[]}');
  await client.applyTags(["s1"], ["t"], []);
  await client.createCohort("c1", { predicates: [] });
  await client.listCohorts();
  await client.getCohort("c1");
  await client.listWorkflows();
  await client.launchRun("wf", "c1", {});
  await client.listRuns();
  await client.getRun("r1");
  await client.cancelRun("r1");
  await client.listExtensions();
  await client.installExtension(upload);
  await client.uninstallExtension("ext");
  await client.issueInvite();
  await client.createLink("http://peer", "invite-token");
  await client.listLinks();
  await client.createFedJob({ workflow: "wf", participants: [],
                              rounds: 1, init_params: [0] });
  await client.listFedJobs();
  await client.getFedJob("j1");
  await client.readAudit(0, 100);
}

describe("ApiClient", () => {
  it("touches only documented endpoints across its whole surface", async () => {
    const log: Captured[] = [];
    const client = new ApiClient("", recordingFetch(log, loginBody));
    await exerciseEverything(client);
    expect(log.length).toBeGreaterThanOrEqual(25);
    for (const call of log) {
      const hit = DOCUMENTED_ROUTES.some(
        ([method, pattern]) =>
          method === call.method && pattern.test(call.url));
      expect(hit, `${call.method} ${call.url} is undocumented`).toBe(true);
    }
  });

  it("attaches the bearer token to every authenticated request", async () => {
    const log: Captured[] = [];
    const client = new ApiClient("", recordingFetch(log, loginBody));
    await exerciseEverything(client);
    for (const call of log) {
      if (call.url.endsWith("/login")) {
        expect(call.headers["Authorization"]).toBeUndefined();
      } else {
        expect(call.headers["Authorization"]).toBe(`Bearer ${TOKEN}`);
      }
    }
  });

  it("never leaks the token into a URL", async () => {
    const log: Captured[] = [];
    const client = new ApiClient("", recordingFetch(log, loginBody));
    await exerciseEverything(client);
    for (const call of log) {
      expect(call.url.includes(TOKEN)).toBe(false);
    }
  });

  it("keeps the token out of JSON serialization and enumeration", async () => {
    const log: Captured[] = [];
    const client = new ApiClient("", recordingFetch(log, loginBody));
    await client.login("u", "pw");
    expect(JSON.stringify(client).includes(TOKEN)).toBe(false);
    expect(Object.values(client).join("|").includes(TOKEN)).toBe(false);
  });

  it("builds preview URLs from the series UID", () => {
    const client = new ApiClient("");
    expect(client.seriesPreviewUrl("1.2.3")).toBe(
      "/api/v1/series/1.2.3/preview.png");
    expect(client.seriesPreviewUrl("1.2.3", 128)).toBe(
      "/api/v1/series/1.2.3/preview.png?max_edge=128");
  });

  it("maps error bodies onto ApiError", async () => {
    const fetchFn: FetchLike = async (url) =>
      url.endsWith("/login")
        ? new Response(JSON.stringify(loginBody(url)), { status: 200 })
        : new Response(JSON.stringify({ error_code: "permission_denied",
                                        message: "tag requires researcher" }),
                       { status: 403 });
    const client = new ApiClient("", fetchFn);
    await client.login("u", "pw");
    let caught: unknown = null;
    try {
      await client.applyTags(["s"], ["t"], []);
    } catch (err) {
      caught = err;
    }
    expect(caught).toBeInstanceOf(ApiError);
    const error = caught as ApiError;
    expect(error.status).toBe(403);
    expect(error.errorCode).toBe("permission_denied");
    expect(error.message).toBe("tag requires researcher");
  });

  it("refuses authenticated calls without a session, with zero requests", async () => {
    const log: Captured[] = [];
    const client = new ApiClient("", recordingFetch(log));
    await expect(client.listRuns()).rejects.toMatchObject(
      { errorCode: "no_session" });
    expect(log.length).toBe(0);
  });

  it("logout drops the session from memory", async () => {
    const log: Captured[] = [];
    const client = new ApiClient("", recordingFetch(log, loginBody));
    await client.login("u", "pw");
    expect(client.loggedIn).toBe(true);
    client.logout();
    expect(client.loggedIn).toBe(false);
    expect(client.currentPrincipal).toBeNull();
    await expect(client.listRuns()).rejects.toBeInstanceOf(ApiError);
    expect(log.filter((c) => !c.url.endsWith("/login")).length).toBe(0);
  });

  it("reports admin role from the logged-in principal", async () => {
    const log: Captured[] = [];
    const client = new ApiClient("", recordingFetch(log, loginBody));
    expect(client.isAdmin).toBe(false);
    await client.login("u", "pw");
    expect(client.isAdmin).toBe(false);   // login fixture grants researcher
    await client.whoami();                // whoami fixture grants admin
    expect(client.isAdmin).toBe(true);
  });
});
