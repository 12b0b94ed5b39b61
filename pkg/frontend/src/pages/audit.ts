import type { ApiClient } from "../api.js";
import { banner, el } from "../dom.js";
import type { Page } from "./login.js";

/** Audit view (admin only): event table plus chain verification status. */
export function auditPage(client: ApiClient): Page {
  const status = el("div", {});
  const table = el("table", { className: "audit" },
    el("tr", {},
      el("th", { text: "seq" }), el("th", { text: "time" }),
      el("th", { text: "principal" }), el("th", { text: "action" }),
      el("th", { text: "resource" }), el("th", { text: "outcome" })));

  void (async () => {
    try {
      const doc = await client.readAudit(0);
      status.append(banner(
        doc.first_invalid === null ? "info" : "error",
        doc.first_invalid === null
          ? `chain verified: ${doc.events.length} events intact`
          : `TAMPER DETECTED at seq ${doc.first_invalid}`));
      for (const event of doc.events) {
        table.append(el("tr", { className: `outcome-${event.outcome}` },
          el("td", { text: String(event.seq) }),
          el("td", { text: event.time }),
          el("td", { text: event.principal }),
          el("td", { text: event.action }),
          el("td", { text: event.resource }),
          el("td", { text: event.outcome })));
      }
    } catch {
      status.append(banner("error", "audit requires the admin role"));
    }
  })();

  const element = el("section", { className: "page page-audit" },
    el("h1", { text: "Audit" }), status, table);
  return { element, destroy: () => undefined };
}
