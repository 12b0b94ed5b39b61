import type { ApiClient } from "../api.js";
import { banner, clear, el } from "../dom.js";
import {
  buildFilterQuery,
  buildFilterQueryDoc,
  describeFilter,
  emptyFilterState,
  InvalidDateRange,
  type FilterState,
} from "../filters.js";
import { renderGallery, SelectionStore } from "../gallery.js";
import { projectHistogram } from "../histogram.js";
import {
  buildMultipart,
  filesFromDataTransfer,
  filesFromInput,
} from "../multipart.js";
import type { Page } from "./login.js";

const HISTOGRAM_ATTRS = ["Modality", "PatientID", "StudyDate",
                         "BodyPartExamined"];

/** Datasets view: filter bar, series gallery, tag editor, histogram. */
export function datasetsPage(client: ApiClient): Page {
  const selection = new SelectionStore();
  const status = el("div", {});
  const galleryBox = el("div", { className: "gallery" });
  const histogramBox = el("div", { className: "histogram" });

  // -- filter bar -----------------------------------------------------------
  const modality = el("input", { type: "text", placeholder: "Modality" });
  const modalityPrefix = el("input", { type: "checkbox" });
  const patient = el("input", { type: "text", placeholder: "PatientID" });
  const dateFrom = el("input", { type: "text", placeholder: "from YYYYMMDD" });
  const dateTo = el("input", { type: "text", placeholder: "to YYYYMMDD" });
  const tagFilter = el("input", { type: "text", placeholder: "tag" });
  const histAttr = el("select", {});
  for (const attr of HISTOGRAM_ATTRS) {
    histAttr.append(el("option", { value: attr, text: attr }));
  }

  function currentFilter(): FilterState {
    const state = emptyFilterState();
    if (modality.value !== "") {
      state.texts.push({ attribute: "Modality", text: modality.value,
                         prefix: modalityPrefix.checked });
    }
    if (patient.value !== "") {
      state.texts.push({ attribute: "PatientID", text: patient.value,
                         prefix: false });
    }
    if (dateFrom.value !== "" || dateTo.value !== "") {
      state.dateRanges.push({ attribute: "StudyDate",
                              start: dateFrom.value, end: dateTo.value });
    }
    if (tagFilter.value !== "") state.tags.push(tagFilter.value);
    return state;
  }

  async function refresh(): Promise<void> {
    clear(status);
    let encoded: string;
    let state: FilterState;
    try {
      state = currentFilter();
      encoded = buildFilterQuery(state);
    } catch (err) {
      if (err instanceof InvalidDateRange) {
        status.append(banner("error", err.message));   // inline, no request
        return;
      }
      throw err;
    }
    try {
      const [page, agg] = await Promise.all([
        client.listSeries(encoded),
        client.aggregate(histAttr.value, encoded),
      ]);
      drawGallery(page, state);
      drawHistogram(agg);
    } catch {
      status.append(banner("error", "query failed; showing previous results"));
    }
  }

  function drawGallery(
    page: Parameters<typeof renderGallery>[0],
    state: FilterState,
  ): void {
    clear(galleryBox);
    const cards = renderGallery(page, selection.asSet());
    if (cards.length === 0) {
      galleryBox.append(el("div", { className: "empty-state" },
        el("p", { text: "No series match the active filters." }),
        el("p", { className: "filter-summary",
                  text: describeFilter(state) })));
      return;
    }
    for (const card of cards) {
      const tile = el("figure",
        { className: card.selected ? "card selected" : "card" },
        el("img", { src: card.thumbnailUrl, alt: card.seriesUid }),
        el("figcaption", {},
          el("span", { className: "badge", text: card.modality }),
          el("span", { text: ` ${card.instanceCount} instances` }),
          el("span", { className: "tags",
                       text: card.tags.length ? ` [${card.tags.join(", ")}]` : "" })));
      tile.addEventListener("click", () => {
        selection.toggle(card.seriesUid);
        tile.classList.toggle("selected");
      });
      galleryBox.append(tile);
    }
  }

  function drawHistogram(doc: Parameters<typeof projectHistogram>[0]): void {
    clear(histogramBox);
    const view = projectHistogram(doc);
    histogramBox.append(el("h3",
      { text: `${view.attr} — ${view.total} series` }));
    for (const bar of view.bars) {
      const fill = el("div", { className: "bar-fill" });
      fill.style.width = `${Math.round(bar.fraction * 100)}%`;
      histogramBox.append(el("div", { className: "bar" },
        el("span", { className: "bar-label",
                     text: `${bar.label} (${bar.count})` }), fill));
    }
  }

  // -- tag editor ------------------------------------------------------------
  const tagInput = el("input", { type: "text", placeholder: "tag name" });
  async function editTags(add: boolean): Promise<void> {
    clear(status);
    if (tagInput.value === "" || selection.size === 0) return;
    try {
      const result = await client.applyTags(
        selection.list(),
        add ? [tagInput.value] : [],
        add ? [] : [tagInput.value]);
      status.append(banner("info", `${result.updated} series updated`));
      await refresh();
    } catch {
      status.append(banner("error", "tag update failed"));
    }
  }

  // -- cohort ---------------------------------------------------------------
  const cohortName = el("input", { type: "text", placeholder: "cohort name" });
  async function saveCohort(): Promise<void> {
    clear(status);
    if (cohortName.value === "") return;
    try {
      const doc = buildFilterQueryDoc(currentFilter());
      const cohort = await client.createCohort(cohortName.value, doc);
      status.append(banner("info",
        `cohort ${cohort.name}: ${cohort.series_count} series frozen`));
    } catch (err) {
      const message = err instanceof InvalidDateRange
        ? err.message : "cohort creation failed";
      status.append(banner("error", message));
    }
  }

  // -- upload (drag-and-drop and picker share one builder) ---------------------
  const picker = el("input", { type: "file", multiple: true });
  picker.addEventListener("change", () => {
    void (async () => {
      const files = await filesFromInput(picker);
      if (files.length > 0) await doUpload(files);
    })();
  });
  const dropZone = el("div", { className: "drop-zone",
                               text: "Drop DICOM files here" });
  dropZone.addEventListener("dragover", (ev) => ev.preventDefault());
  dropZone.addEventListener("drop", (ev) => {
    ev.preventDefault();
    if (!ev.dataTransfer) return;
    void (async () => {
      const files = await filesFromDataTransfer(ev.dataTransfer!);
      if (files.length > 0) await doUpload(files);
    })();
  });

  async function doUpload(
    files: Awaited<ReturnType<typeof filesFromInput>>,
  ): Promise<void> {
    clear(status);
    try {
      const result = await client.uploadStudies(await buildMultipart(files));
      status.append(banner("info", `${result.count} instances stored`));
      await refresh();
    } catch {
      status.append(banner("error", "upload failed"));
    }
  }

  const applyButton = el("button",
    { text: "Apply filters", onclick: () => void refresh() });
  histAttr.addEventListener("change", () => void refresh());

  const element = el("section", { className: "page page-datasets" },
    el("h1", { text: "Datasets" }),
    el("div", { className: "filter-bar" },
      modality, el("label", {}, modalityPrefix, "prefix"),
      patient, dateFrom, dateTo, tagFilter, applyButton),
    el("div", { className: "toolbar" },
      tagInput,
      el("button", { text: "Add tag", onclick: () => void editTags(true) }),
      el("button", { text: "Remove tag", onclick: () => void editTags(false) }),
      cohortName,
      el("button", { text: "Save cohort", onclick: () => void saveCohort() }),
      histAttr),
    status,
    el("div", { className: "datasets-body" }, galleryBox, histogramBox),
    el("div", { className: "upload-bar" }, dropZone, picker));

  void refresh();
  return { element, destroy: () => undefined };
}
