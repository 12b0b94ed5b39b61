/** Series gallery projection: one card per series, API order preserved. */

import type { SeriesPage } from "./types.js";

export interface GalleryCard {
  seriesUid: string;
  studyUid: string;
  thumbnailUrl: string;
  modality: string;
  instanceCount: number;
  tags: string[];
  selected: boolean;
}

/** Pure projection of a series-level page onto gallery cards. */
export function renderGallery(
  page: SeriesPage,
  selection: ReadonlySet<string> = new Set(),
): GalleryCard[] {
  return page.items.map((item) => ({
    seriesUid: item.series_uid,
    studyUid: item.study_uid,
    thumbnailUrl: item.preview_url,
    modality: item.representative.attrs["Modality"] ?? "??",
    instanceCount: item.instance_count,
    tags: [...item.tags],
    selected: selection.has(item.series_uid),
  }));
}

/** Selected series UIDs, kept outside the page so paging can't drop them. */
export class SelectionStore {
  private readonly uids = new Set<string>();

  toggle(seriesUid: string): boolean {
    if (this.uids.has(seriesUid)) {
      this.uids.delete(seriesUid);
      return false;
    }
    this.uids.add(seriesUid);
    return true;
  }

  has(seriesUid: string): boolean {
    return this.uids.has(seriesUid);
  }

  clear(): void {
    this.uids.clear();
  }

  get size(): number {
    return this.uids.size;
  }

  asSet(): ReadonlySet<string> {
    return this.uids;
  }

  list(): string[] {
    return [...this.uids].sort();
  }
}
