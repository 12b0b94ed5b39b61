/** Gallery projection against a series page recorded from a live node. */

import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import { renderGallery, SelectionStore } from "../src/gallery.js";
import type { SeriesPage } from "../src/types.js";

function fixture<T>(name: string): T {
  const url = new URL(`./fixtures/${name}`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf-8")) as T;
}

const page = fixture<SeriesPage>("series_page.json");
const emptyPage = fixture<SeriesPage>("series_empty.json");

describe("renderGallery", () => {
  it("renders exactly one card per series", () => {
    const cards = renderGallery(page);
    expect(page.count).toBe(5);
    expect(cards.length).toBe(page.items.length);
    expect(new Set(cards.map((c) => c.seriesUid)).size).toBe(cards.length);
  });

  it("derives every thumbnail URL from the card's own series UID", () => {
    for (const card of renderGallery(page)) {
      // recomputed from the UID, not copied blindly from the fixture
      expect(card.thumbnailUrl).toBe(
        `/api/v1/series/${card.seriesUid}/preview.png`);
    }
  });

  it("preserves the API's result order", () => {
    const cards = renderGallery(page);
    expect(cards.map((c) => c.seriesUid))
      .toEqual(page.items.map((i) => i.series_uid));
  });

  it("projects modality, instance count, and tags from the document", () => {
    const byUid = new Map(page.items.map((i) => [i.series_uid, i]));
    for (const card of renderGallery(page)) {
      const item = byUid.get(card.seriesUid)!;
      expect(card.modality).toBe(item.representative.attrs["Modality"]);
      expect(card.instanceCount).toBe(item.instance_count);
      expect(card.tags).toEqual(item.tags);
    }
  });

  it("renders the recorded tag state", () => {
    const tagged = renderGallery(page).filter((c) => c.tags.length > 0);
    expect(tagged.length).toBe(3);
    expect(tagged.some((c) => c.tags.includes("reviewed"))).toBe(true);
    expect(tagged.some((c) => c.tags.includes("training_set"))).toBe(true);
  });

  it("renders an empty result as zero cards", () => {
    expect(emptyPage.count).toBe(0);
    expect(renderGallery(emptyPage)).toEqual([]);
  });
});

describe("SelectionStore", () => {
  it("keeps selection across page swaps", () => {
    const selection = new SelectionStore();
    const first = page.items[0]!.series_uid;
    const third = page.items[2]!.series_uid;
    selection.toggle(first);
    selection.toggle(third);

    // page away to an empty result and back: flags are reproduced
    renderGallery(emptyPage, selection.asSet());
    const cards = renderGallery(page, selection.asSet());
    expect(cards.filter((c) => c.selected).map((c) => c.seriesUid).sort())
      .toEqual([first, third].sort());
  });

  it("toggles on and off", () => {
    const selection = new SelectionStore();
    expect(selection.toggle("s1")).toBe(true);
    expect(selection.has("s1")).toBe(true);
    expect(selection.toggle("s1")).toBe(false);
    expect(selection.size).toBe(0);
  });

  it("lists selected series in sorted order for tag requests", () => {
    const selection = new SelectionStore();
    selection.toggle("uid-b");
    selection.toggle("uid-a");
    expect(selection.list()).toEqual(["uid-a", "uid-b"]);
  });
});
