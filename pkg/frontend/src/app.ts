/** Single-page console: hash router over the five views plus login.
 *
 * Navigation destroys the outgoing page, which cancels any pollers it
 * owns; the audit tab is offered only to admins.
 */

import { ApiClient } from "./api.js";
import { clear, el } from "./dom.js";
import { auditPage } from "./pages/audit.js";
import { datasetsPage } from "./pages/datasets.js";
import { extensionsPage } from "./pages/extensions.js";
import { federationPage } from "./pages/federation.js";
import { loginPage, type Page } from "./pages/login.js";
import { workflowsPage } from "./pages/workflows.js";

type PageFactory = (client: ApiClient) => Page;

const PAGES: Record<string, { label: string; make: PageFactory; admin?: boolean }> = {
  datasets: { label: "Datasets", make: datasetsPage },
  workflows: { label: "Workflows", make: workflowsPage },
  federation: { label: "Federation", make: federationPage },
  extensions: { label: "Extensions", make: extensionsPage },
  audit: { label: "Audit", make: auditPage, admin: true },
};

export function mountApp(root: HTMLElement, client = new ApiClient()): void {
  const nav = el("nav", {});
  const outlet = el("main", {});
  root.append(nav, outlet);
  let current: Page | null = null;

  function show(page: Page): void {
    current?.destroy();
    clear(outlet);
    current = page;
    outlet.append(page.element);
  }

  function drawNav(): void {
    clear(nav);
    if (!client.loggedIn) return;
    for (const [key, entry] of Object.entries(PAGES)) {
      if (entry.admin && !client.isAdmin) continue;
      nav.append(el("a", { href: `#${key}`, text: entry.label }));
    }
    nav.append(el("a", {
      href: "#", text: "Sign out",
      onclick: (ev) => {
        ev.preventDefault();
        client.logout();
        drawNav();
        show(makeLogin());
      },
    }));
  }

  function makeLogin(): Page {
    return loginPage(client, () => {
      drawNav();
      window.location.hash = "#datasets";
      route();
    });
  }

  function route(): void {
    if (!client.loggedIn) {
      show(makeLogin());
      return;
    }
    const key = window.location.hash.replace(/^#/, "") || "datasets";
    const entry = PAGES[key];
    if (entry === undefined || (entry.admin && !client.isAdmin)) {
      window.location.hash = "#datasets";
      return;
    }
    show(entry.make(client));
  }

  window.addEventListener("hashchange", route);
  route();
}
