import type { ApiClient } from "../api.js";
import { banner, clear, el } from "../dom.js";
import {
  buildMultipart,
  filesFromDataTransfer,
  filesFromInput,
  type UploadFile,
} from "../multipart.js";
import type { Page } from "./login.js";

/** Extensions view: installed list plus drag-and-drop / picker install. */
export function extensionsPage(client: ApiClient): Page {
  const status = el("div", {});
  const listBox = el("div", { className: "extensions" });

  async function refresh(): Promise<void> {
    const { extensions } = await client.listExtensions();
    clear(listBox);
    if (extensions.length === 0) {
      listBox.append(el("p", { text: "No extensions installed." }));
      return;
    }
    for (const ext of extensions) {
      const removeButton = el("button", {
        text: "Uninstall",
        onclick: () => void uninstall(ext.name),
      });
      listBox.append(el("div", { className: "extension-row" },
        el("strong", { text: `${ext.name} ${ext.version}` }),
        el("span", { text: ` — workflows: ${ext.workflows.join(", ") || "none"};` +
                          ` operators: ${ext.operators.join(", ") || "none"}` }),
        removeButton));
    }
  }

  async function uninstall(name: string): Promise<void> {
    clear(status);
    try {
      await client.uninstallExtension(name);
      status.append(banner("info", `${name} removed`));
      await refresh();
    } catch {
      status.append(banner("error", `failed to remove ${name}`));
    }
  }

  async function install(files: UploadFile[]): Promise<void> {
    clear(status);
    if (files.length !== 1) {
      status.append(banner("error", "select exactly one extension archive"));
      return;
    }
    try {
      const { installed } = await client.installExtension(
        await buildMultipart(files));
      status.append(banner("info",
        `installed ${installed.map((e) => `${e.name} ${e.version}`).join(", ")}`));
      await refresh();
    } catch {
      status.append(banner("error", "install failed; platform unchanged"));
    }
  }

  const picker = el("input", { type: "file" });
  picker.addEventListener("change", () => {
    void (async () => install(await filesFromInput(picker)))();
  });
  const dropZone = el("div", { className: "drop-zone",
                               text: "Drop an extension archive here" });
  dropZone.addEventListener("dragover", (ev) => ev.preventDefault());
  dropZone.addEventListener("drop", (ev) => {
    ev.preventDefault();
    if (!ev.dataTransfer) return;
    void (async () => install(await filesFromDataTransfer(ev.dataTransfer!)))();
  });

  const element = el("section", { className: "page page-extensions" },
    el("h1", { text: "Extensions" }),
    status, listBox,
    el("div", { className: "upload-bar" }, dropZone, picker));

  void refresh().catch(() => {
    status.append(banner("error", "failed to list extensions"));
  });
  return { element, destroy: () => undefined };
}
