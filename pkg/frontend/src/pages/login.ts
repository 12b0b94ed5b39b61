import type { ApiClient } from "../api.js";
import { ApiError } from "../api.js";
import { banner, clear, el } from "../dom.js";

export interface Page {
  element: HTMLElement;
  destroy(): void;
}

export function loginPage(
  client: ApiClient,
  onLoggedIn: () => void,
): Page {
  const status = el("div", {});
  const username = el("input", {
    type: "text", name: "username", placeholder: "username",
  });
  const password = el("input", {
    type: "password", name: "password", placeholder: "password",
  });
  const form = el("form", {
    onsubmit: (ev) => {
      ev.preventDefault();
      void submit();
    },
  }, username, password, el("button", { type: "submit", text: "Sign in" }));

  async function submit(): Promise<void> {
    clear(status);
    try {
      await client.login(username.value, password.value);
      onLoggedIn();
    } catch (err) {
      const message = err instanceof ApiError
        ? err.message : "login failed";
      status.append(banner("error", message));
    }
  }

  const element = el("section", { className: "page page-login" },
    el("h1", { text: "Sign in" }), form, status);
  return { element, destroy: () => undefined };
}
