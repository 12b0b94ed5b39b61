/** Filter bar state and its canonical query encoding.
 *
 * Every distinct filter state maps to exactly one encoded query string:
 * predicates are sorted by (attribute, kind) — tag predicates sort under
 * their tag name — with the full encoded form as a final tiebreak, `in`
 * value lists are sorted, and serialization uses a fixed key order with no
 * whitespace. Entering the same filters in any input order therefore
 * produces byte-identical encodings, which also makes the encoding usable
 * as a cache key.
 */

import type { EncodedPredicate, EncodedQuery } from "./types.js";

/** Raised for an unusable date range; surfaced inline, no request is sent. */
export class InvalidDateRange extends Error {
  constructor(message: string) {
    super(message);
    this.name = "InvalidDateRange";
  }
}

export interface TextFilter {
  attribute: string;
  text: string;
  /** true: match values starting with the text; false: exact match. */
  prefix: boolean;
}

export interface DateRangeFilter {
  attribute: string;
  /** Inclusive bounds, DICOM DA form (YYYYMMDD); empty string = open end. */
  start: string;
  end: string;
}

export interface InSetFilter {
  attribute: string;
  values: string[];
}

export interface FilterState {
  texts: TextFilter[];
  dateRanges: DateRangeFilter[];
  inSets: InSetFilter[];
  tags: string[];
}

export function emptyFilterState(): FilterState {
  return { texts: [], dateRanges: [], inSets: [], tags: [] };
}

const DATE_RE = /^\d{8}$/;
/** Open-ended pickers fall back to the extremes of the DA string order. */
const DATE_MIN = "00000000";
const DATE_MAX = "99999999";

function checkDate(attribute: string, label: string, value: string): void {
  if (value !== "" && !DATE_RE.test(value)) {
    throw new InvalidDateRange(
      `${attribute}: ${label} date must be YYYYMMDD, got ${JSON.stringify(value)}`,
    );
  }
}

function collectPredicates(state: FilterState): EncodedPredicate[] {
  const out: EncodedPredicate[] = [];
  for (const t of state.texts) {
    if (t.text === "") continue;
    out.push(t.prefix
      ? { kind: "prefix", attr: t.attribute, value: t.text }
      : { kind: "equals", attr: t.attribute, value: t.text });
  }
  for (const r of state.dateRanges) {
    if (r.start === "" && r.end === "") continue;
    checkDate(r.attribute, "start", r.start);
    checkDate(r.attribute, "end", r.end);
    const start = r.start === "" ? DATE_MIN : r.start;
    const end = r.end === "" ? DATE_MAX : r.end;
    if (start > end) {
      throw new InvalidDateRange(
        `${r.attribute}: start ${start} is after end ${end}`);
    }
    out.push({ kind: "date_range", attr: r.attribute, start, end });
  }
  for (const s of state.inSets) {
    if (s.values.length === 0) continue;
    out.push({ kind: "in", attr: s.attribute, values: [...s.values].sort() });
  }
  for (const tag of state.tags) {
    out.push({ kind: "has_tag", tag });
  }
  return out;
}

function sortKey(p: EncodedPredicate): [string, string, string] {
  const attribute = p.kind === "has_tag" ? p.tag : p.attr;
  return [attribute, p.kind, serializePredicate(p)];
}

/** Fixed key order per kind so serialization is deterministic. */
function serializePredicate(p: EncodedPredicate): string {
  switch (p.kind) {
    case "equals":
    case "prefix":
      return JSON.stringify({ kind: p.kind, attr: p.attr, value: p.value });
    case "date_range":
      return JSON.stringify(
        { kind: p.kind, attr: p.attr, start: p.start, end: p.end });
    case "in":
      return JSON.stringify({ kind: p.kind, attr: p.attr, values: p.values });
    case "has_tag":
      return JSON.stringify({ kind: p.kind, tag: p.tag });
  }
}

/** Canonical encoded query; the empty state encodes the match-all query. */
export function buildFilterQuery(state: FilterState): string {
  const predicates = collectPredicates(state);
  predicates.sort((a, b) => {
    const ka = sortKey(a);
    const kb = sortKey(b);
    for (let i = 0; i < 3; i++) {
      if (ka[i]! < kb[i]!) return -1;
      if (ka[i]! > kb[i]!) return 1;
    }
    return 0;
  });
  return `{"predicates":[${predicates.map(serializePredicate).join(",")}]}`;
}

/** The parsed form, for endpoints that take the query as a JSON field. */
export function buildFilterQueryDoc(state: FilterState): EncodedQuery {
  return JSON.parse(buildFilterQuery(state)) as EncodedQuery;
}

/** Human-readable one-line summary for the empty-state panel. */
export function describeFilter(state: FilterState): string {
  const parts: string[] = [];
  for (const t of state.texts) {
    if (t.text === "") continue;
    parts.push(`${t.attribute} ${t.prefix ? "starts with" : "="} ${t.text}`);
  }
  for (const r of state.dateRanges) {
    if (r.start === "" && r.end === "") continue;
    parts.push(`${r.attribute} in [${r.start || "…"} .. ${r.end || "…"}]`);
  }
  for (const s of state.inSets) {
    if (s.values.length === 0) continue;
    parts.push(`${s.attribute} in {${[...s.values].sort().join(", ")}}`);
  }
  for (const tag of state.tags) parts.push(`tag ${tag}`);
  return parts.length === 0 ? "no filters" : parts.join(" AND ");
}
