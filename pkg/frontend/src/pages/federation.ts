import type { ApiClient } from "../api.js";
import { banner, clear, el } from "../dom.js";
import type { FedJobDoc } from "../types.js";
import type { Page } from "./login.js";

const JOB_POLL_MS = 2000;

/** Federation view: links, invites, job launch and per-round progress. */
export function federationPage(client: ApiClient): Page {
  const status = el("div", {});
  const linksBox = el("div", { className: "links" });
  const jobsBox = el("div", { className: "fed-jobs" });
  let timer: ReturnType<typeof setTimeout> | null = null;
  let destroyed = false;

  async function loadLinks(): Promise<void> {
    const { links } = await client.listLinks();
    clear(linksBox);
    linksBox.append(el("h3", { text: `Links (${links.length})` }));
    for (const link of links) {
      linksBox.append(el("div", { className: "link-row" },
        el("code", { text: link.remote_instance_id }),
        el("span", { text: ` at ${link.remote_endpoint} — ` }),
        el("span", { text: link.capabilities.join(", ") || "no capabilities" })));
    }
  }

  function jobRow(job: FedJobDoc): HTMLElement {
    const rounds = job.history.length;
    return el("div", { className: `fed-job status-${job.status}` },
      el("code", { text: job.job_id.slice(0, 8) }),
      el("span", { text: ` ${job.workflow} — ${job.status},` +
                        ` round ${rounds}/${job.rounds}` }),
      job.final_params
        ? el("code", { className: "params",
                       text: ` [${job.final_params.map((v) => v.toFixed(6)).join(", ")}]` })
        : null);
  }

  async function loadJobs(): Promise<void> {
    const { jobs } = await client.listFedJobs();
    clear(jobsBox);
    jobsBox.append(el("h3", { text: `Jobs (${jobs.length})` }));
    for (const job of jobs) jobsBox.append(jobRow(job));
    const active = jobs.some(
      (j) => j.status !== "succeeded" && j.status !== "failed");
    if (active && !destroyed) {
      timer = setTimeout(() => void loadJobs(), JOB_POLL_MS);
    }
  }

  async function invite(): Promise<void> {
    clear(status);
    try {
      const { invite_token } = await client.issueInvite();
      status.append(banner("info", `invite token: ${invite_token}`));
    } catch {
      status.append(banner("error", "invite failed"));
    }
  }

  const endpointInput = el("input",
    { type: "text", placeholder: "remote endpoint URL" });
  const tokenInput = el("input",
    { type: "text", placeholder: "invite token" });
  async function link(): Promise<void> {
    clear(status);
    try {
      const doc = await client.createLink(endpointInput.value, tokenInput.value);
      status.append(banner("info", `linked to ${doc.remote_instance_id}`));
      await loadLinks();
    } catch {
      status.append(banner("error", "link failed"));
    }
  }

  const jobWorkflow = el("input",
    { type: "text", placeholder: "workflow name" });
  const jobRounds = el("input", { type: "text", value: "3" });
  const jobInit = el("input",
    { type: "text", placeholder: "init params e.g. 0,0,0" });
  async function startJob(): Promise<void> {
    clear(status);
    try {
      const { links } = await client.listLinks();
      const init = jobInit.value.split(",")
        .map((v) => Number.parseFloat(v.trim()))
        .filter((v) => Number.isFinite(v));
      await client.createFedJob({
        workflow: jobWorkflow.value,
        participants: links.map((l) => l.link_id),
        rounds: Number.parseInt(jobRounds.value, 10) || 1,
        init_params: init,
      });
      await loadJobs();
    } catch {
      status.append(banner("error", "job start failed"));
    }
  }

  const element = el("section", { className: "page page-federation" },
    el("h1", { text: "Federation" }),
    el("div", { className: "toolbar" },
      el("button", { text: "Issue invite", onclick: () => void invite() }),
      endpointInput, tokenInput,
      el("button", { text: "Link", onclick: () => void link() })),
    el("div", { className: "toolbar" },
      jobWorkflow, jobRounds, jobInit,
      el("button", { text: "Start job", onclick: () => void startJob() })),
    status, linksBox, jobsBox);

  void loadLinks().then(loadJobs).catch(() => {
    status.append(banner("error", "federation is not configured"));
  });
  return {
    element,
    destroy: () => {
      destroyed = true;
      if (timer !== null) clearTimeout(timer);
    },
  };
}
