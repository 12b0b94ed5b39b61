/** Run monitor: badge projection replayed against scheduler-produced
 * traces, plus polling/cancel behavior with a scripted client.
 */

import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import {
  initialRunView,
  markStale,
  POLL_INTERVAL_MS,
  reduceRunStatus,
  RunMonitor,
  type RunClient,
  type RunView,
} from "../src/runs.js";
import type { RunDoc } from "../src/types.js";

function fixture<T>(name: string): T {
  const url = new URL(`./fixtures/${name}`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf-8")) as T;
}

const retryTrace = fixture<{ polls: RunDoc[] }>("run_trace.json").polls;
const failureTrace =
  fixture<{ polls: RunDoc[] }>("run_failure_trace.json").polls;
const liveRun = fixture<RunDoc>("run_live.json");

function replay(trace: RunDoc[]): RunView[] {
  const views: RunView[] = [];
  let view = initialRunView(trace[0]!.run_id);
  for (const doc of trace) {
    view = reduceRunStatus(view, doc);
    views.push(view);
  }
  return views;
}

function badgeTimeline(
  views: RunView[], nodeId: string,
): [string, number][] {
  return views.map((v) => {
    const node = v.nodes.find((n) => n.nodeId === nodeId)!;
    return [node.badge, node.attempts];
  });
}

describe("reduceRunStatus against the recorded scheduler trace", () => {
  it("shows Running again with attempt 2 after a retried failure", () => {
    const views = replay(retryTrace);
    expect(badgeTimeline(views, "stats")).toEqual([
      ["Pending", 0],
      ["Pending", 0],
      ["Ready", 0],
      ["Running", 1],
      ["Failed", 1],
      ["Ready", 1],
      ["Running", 2],   // back to Running on the poll after the retry
      ["Succeeded", 2],
      ["Succeeded", 2],
      ["Succeeded", 2],
    ]);
  });

  it("tracks the overall run badge through to Succeeded", () => {
    const views = replay(retryTrace);
    expect(views.map((v) => v.overall)).toEqual([
      "Pending", "Running", "Running", "Running", "Running",
      "Running", "Running", "Running", "Running", "Succeeded",
    ]);
    expect(views.map((v) => v.terminal))
      .toEqual([...Array(9).fill(false), true]);
  });

  it("marks exhausted failures Failed and descendants Skipped", () => {
    const views = replay(failureTrace);
    const last = views[views.length - 1]!;
    expect(last.overall).toBe("Failed");
    expect(last.terminal).toBe(true);
    const byId = new Map(last.nodes.map((n) => [n.nodeId, n]));
    expect(byId.get("fetch")!.badge).toBe("Succeeded");
    expect(byId.get("stats")!.badge).toBe("Failed");
    expect(byId.get("stats")!.attempts).toBe(2);
    expect(byId.get("echo")!.badge).toBe("Succeeded");
    expect(byId.get("join")!.badge).toBe("Skipped");
  });

  it("carries the stage columns for the DAG layout", () => {
    const views = replay(retryTrace);
    expect(views[0]!.stages).toEqual([["fetch"], ["echo", "stats"], ["join"]]);
  });

  it("replaces badges wholesale and never mutates the previous view", () => {
    const first = reduceRunStatus(initialRunView(retryTrace[0]!.run_id),
                                  retryTrace[0]!);
    const frozen = JSON.stringify(first);
    const second = reduceRunStatus(first, retryTrace[3]!);
    expect(JSON.stringify(first)).toBe(frozen);
    expect(second.nodes.find((n) => n.nodeId === "stats")!.badge)
      .toBe("Running");
  });

  it("projects a genuine server document the same way", () => {
    const view = reduceRunStatus(initialRunView(liveRun.run_id), liveRun);
    expect(view.overall).toBe("Succeeded");
    expect(view.terminal).toBe(true);
    expect(view.nodes.every((n) => n.badge === "Succeeded")).toBe(true);
  });

  it("keeps the last good view on a failed poll, flagged stale", () => {
    const view = replay(retryTrace)[4]!;
    const stale = markStale(view);
    expect(stale.stale).toBe(true);
    expect(stale.nodes).toEqual(view.nodes);
    expect(stale.overall).toBe(view.overall);
  });
});

/** Scripted client: each getRun() serves the next trace document. */
class ScriptedClient implements RunClient {
  polls = 0;
  cancels = 0;
  failOnPoll: number | null = null;

  constructor(private readonly trace: RunDoc[]) {}

  async getRun(): Promise<RunDoc> {
    const index = this.polls;
    this.polls += 1;
    if (index === this.failOnPoll) throw new Error("network down");
    return this.trace[Math.min(index, this.trace.length - 1)]!;
  }

  async cancelRun(): Promise<RunDoc> {
    this.cancels += 1;
    return this.trace[this.trace.length - 1]!;
  }
}

/** Manual scheduler: timers fire only when the test says so. */
class ManualTimers {
  private queue: (() => void)[] = [];
  canceled = 0;
  intervals: number[] = [];

  schedule = (fn: () => void, ms: number): unknown => {
    this.intervals.push(ms);
    this.queue.push(fn);
    return this.queue.length - 1;
  };

  cancel = (_handle: unknown): void => {
    this.canceled += 1;
    this.queue = [];
  };

  async fire(): Promise<void> {
    const fn = this.queue.shift();
    if (fn) fn();
    await Promise.resolve();  // let the poll promise settle
    await Promise.resolve();
    await Promise.resolve();
  }

  get pending(): number {
    return this.queue.length;
  }
}

describe("RunMonitor", () => {
  async function driven(trace: RunDoc[]) {
    const client = new ScriptedClient(trace);
    const timers = new ManualTimers();
    const seen: RunView[] = [];
    const monitor = new RunMonitor(client, trace[0]!.run_id,
                                   (v) => seen.push(v),
                                   timers.schedule, timers.cancel);
    await monitor.start();
    return { client, timers, seen, monitor };
  }

  it("polls every 2 s until the run reports a terminal state", async () => {
    const { client, timers, seen } = await driven(retryTrace);
    while (timers.pending > 0) await timers.fire();
    expect(client.polls).toBe(retryTrace.length);
    expect(seen[seen.length - 1]!.terminal).toBe(true);
    // no timer scheduled after the terminal document
    expect(timers.pending).toBe(0);
    expect(timers.intervals.every((ms) => ms === POLL_INTERVAL_MS)).toBe(true);
    expect(timers.intervals.length).toBe(retryTrace.length - 1);
  });

  it("stops scheduling once stopped explicitly", async () => {
    const { timers, monitor, client } = await driven(retryTrace);
    monitor.stop();
    expect(timers.pending).toBe(0);
    const pollsAtStop = client.polls;
    await timers.fire();   // nothing queued; must be a no-op
    expect(client.polls).toBe(pollsAtStop);
  });

  it("keeps the last view and flags stale when a poll fails", async () => {
    const client = new ScriptedClient(retryTrace);
    client.failOnPoll = 3;
    const timers = new ManualTimers();
    const seen: RunView[] = [];
    const monitor = new RunMonitor(client, retryTrace[0]!.run_id,
                                   (v) => seen.push(v),
                                   timers.schedule, timers.cancel);
    await monitor.start();
    await timers.fire();
    await timers.fire();
    await timers.fire();   // this poll throws
    const stale = seen[seen.length - 1]!;
    expect(stale.stale).toBe(true);
    expect(stale.nodes).toEqual(seen[seen.length - 2]!.nodes);
    // polling resumes afterwards
    await timers.fire();
    expect(seen[seen.length - 1]!.stale).toBe(false);
    expect(monitor.current.stale).toBe(false);
  });

  it("issues exactly one cancel request no matter how often clicked", async () => {
    const { client, monitor } = await driven(retryTrace.slice(0, 4));
    await monitor.cancel();
    await monitor.cancel();
    await monitor.cancel();
    expect(client.cancels).toBe(1);
    expect(monitor.cancelDisabled).toBe(true);
  });

  it("refuses to cancel a run that is already terminal", async () => {
    const { client, timers, monitor } = await driven(retryTrace);
    while (timers.pending > 0) await timers.fire();
    expect(monitor.current.terminal).toBe(true);
    await monitor.cancel();
    expect(client.cancels).toBe(0);
    expect(monitor.cancelDisabled).toBe(true);
  });
});
