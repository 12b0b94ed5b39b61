/** Attribute distribution panel next to the gallery.
 *
 * Bars come straight from /aggregate; the total shown in the panel header
 * is the endpoint's own total so it always equals the series count of the
 * current query.
 */

import type { AggregateResponse } from "./types.js";

export interface HistogramBar {
  label: string;
  count: number;
  /** Width as a fraction of the largest bar, in [0, 1]. */
  fraction: number;
}

export interface HistogramView {
  attr: string;
  total: number;
  bars: HistogramBar[];
}

export function projectHistogram(doc: AggregateResponse): HistogramView {
  const entries = Object.entries(doc.values)
    .sort((a, b) => b[1] - a[1] || (a[0] < b[0] ? -1 : 1));
  const peak = entries.length > 0 ? entries[0]![1] : 0;
  return {
    attr: doc.attr,
    total: doc.total,
    bars: entries.map(([label, count]) => ({
      label,
      count,
      fraction: peak === 0 ? 0 : count / peak,
    })),
  };
}
