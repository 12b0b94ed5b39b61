import type { ApiClient } from "../api.js";
import { banner, clear, el } from "../dom.js";
import { RunMonitor, type RunView } from "../runs.js";
import type { Page } from "./login.js";

/** Workflows view: catalog, launch form, runs table, live run detail. */
export function workflowsPage(client: ApiClient): Page {
  const status = el("div", {});
  const workflowSelect = el("select", {});
  const cohortSelect = el("select", {});
  const paramsInput = el("input",
    { type: "text", value: "{}", placeholder: "params (JSON object)" });
  const runsBox = el("div", { className: "runs" });
  const detailBox = el("div", { className: "run-detail" });
  let monitor: RunMonitor | null = null;

  async function loadCatalog(): Promise<void> {
    const [{ workflows }, { cohorts }] = await Promise.all([
      client.listWorkflows(), client.listCohorts()]);
    clear(workflowSelect);
    for (const wf of workflows) {
      workflowSelect.append(el("option", {
        value: wf.name,
        text: `${wf.name} ${wf.version} (${wf.source}, ${wf.nodes.length} nodes)`,
      }));
    }
    clear(cohortSelect);
    cohortSelect.append(el("option", { value: "", text: "(no cohort)" }));
    for (const cohort of cohorts) {
      cohortSelect.append(el("option", {
        value: cohort.name,
        text: `${cohort.name} (${cohort.series_count} series)`,
      }));
    }
  }

  async function loadRuns(): Promise<void> {
    const { runs } = await client.listRuns();
    clear(runsBox);
    const table = el("table", {},
      el("tr", {},
        el("th", { text: "run" }), el("th", { text: "workflow" }),
        el("th", { text: "state" }), el("th", { text: "by" })));
    for (const run of runs) {
      const row = el("tr", {},
        el("td", { text: run.run_id.slice(0, 8) }),
        el("td", { text: run.workflow }),
        el("td", { className: `state-${run.state}`, text: run.state }),
        el("td", { text: run.initiated_by }));
      row.addEventListener("click", () => watch(run.run_id));
      table.append(row);
    }
    runsBox.append(table);
  }

  function drawDetail(view: RunView): void {
    clear(detailBox);
    detailBox.append(el("h3", {
      text: `${view.workflow} — ${view.overall}${view.stale ? " (stale)" : ""}`,
    }));
    const columns = el("div", { className: "stage-columns" });
    const byId = new Map(view.nodes.map((n) => [n.nodeId, n]));
    for (const stage of view.stages) {
      const column = el("div", { className: "stage" });
      for (const nodeId of stage) {
        const node = byId.get(nodeId);
        if (!node) continue;
        column.append(el("div",
          { className: `node badge-${node.badge.toLowerCase()}` },
          el("strong", { text: node.nodeId }),
          el("span", { text: ` ${node.badge}` }),
          el("span", { className: "attempts",
                       text: node.attempts > 1 ? ` (attempt ${node.attempts})` : "" }),
          node.error ? el("div", { className: "error", text: node.error }) : null));
      }
      columns.append(column);
    }
    const cancelButton = el("button", {
      text: "Cancel run",
      disabled: monitor?.cancelDisabled ?? true,
      onclick: () => void monitor?.cancel(),
    });
    detailBox.append(columns, cancelButton);
    if (view.terminal) void loadRuns();
  }

  function watch(runId: string): void {
    monitor?.stop();
    monitor = new RunMonitor(client, runId, drawDetail);
    void monitor.start();
  }

  async function launch(): Promise<void> {
    clear(status);
    let params: Record<string, unknown>;
    try {
      params = JSON.parse(paramsInput.value || "{}") as Record<string, unknown>;
    } catch {
      status.append(banner("error", "params must be a JSON object"));
      return;
    }
    try {
      const { run_id } = await client.launchRun(
        workflowSelect.value, cohortSelect.value, params);
      status.append(banner("info", `run ${run_id.slice(0, 8)} started`));
      await loadRuns();
      watch(run_id);
    } catch {
      status.append(banner("error", "launch failed"));
    }
  }

  const element = el("section", { className: "page page-workflows" },
    el("h1", { text: "Workflows" }),
    el("div", { className: "launch-form" },
      workflowSelect, cohortSelect, paramsInput,
      el("button", { text: "Launch", onclick: () => void launch() })),
    status, runsBox, detailBox);

  void loadCatalog().then(loadRuns).catch(() => {
    status.append(banner("error", "failed to load workflows"));
  });
  return {
    element,
    destroy: () => monitor?.stop(),   // navigation cancels the poller
  };
}
