/** Run monitor: badge projection of polled run documents, 2 s polling. */

import type { NodeWireState, RunDoc, RunWireState } from "./types.js";

export const POLL_INTERVAL_MS = 2000;

export type NodeBadge =
  | "Pending" | "Ready" | "Running" | "Succeeded" | "Failed" | "Skipped";
export type RunBadge = NodeBadge | "Canceled";

const NODE_BADGES: Record<NodeWireState, NodeBadge> = {
  pending: "Pending",
  ready: "Ready",
  running: "Running",
  succeeded: "Succeeded",
  failed: "Failed",
  skipped: "Skipped",
};

const RUN_BADGES: Record<RunWireState, RunBadge> = {
  pending: "Pending",
  running: "Running",
  succeeded: "Succeeded",
  failed: "Failed",
  canceled: "Canceled",
};

const TERMINAL: ReadonlySet<RunWireState> =
  new Set(["succeeded", "failed", "canceled"]);

export interface NodeBadgeView {
  nodeId: string;
  operator: string;
  badge: NodeBadge;
  attempts: number;
  error: string | null;
}

export interface RunView {
  runId: string;
  workflow: string;
  overall: RunBadge;
  /** True once the run document reports a terminal state: stop polling. */
  terminal: boolean;
  cancelRequested: boolean;
  /** Node badges in definition order; replaced wholesale on every poll. */
  nodes: NodeBadgeView[];
  /** Stage columns for the DAG layout, verbatim from the document. */
  stages: string[][];
  /** Set when the latest poll failed and this view is the last good one. */
  stale: boolean;
}

export function initialRunView(runId: string): RunView {
  return {
    runId,
    workflow: "",
    overall: "Pending",
    terminal: false,
    cancelRequested: false,
    nodes: [],
    stages: [],
    stale: false,
  };
}

/** Pure projection: the new view depends only on the polled document. */
export function reduceRunStatus(previous: RunView, doc: RunDoc): RunView {
  return {
    runId: doc.run_id,
    workflow: doc.workflow,
    overall: RUN_BADGES[doc.state],
    terminal: TERMINAL.has(doc.state),
    cancelRequested: previous.cancelRequested || doc.cancel_requested,
    nodes: doc.nodes.map((n) => ({
      nodeId: n.id,
      operator: n.operator,
      badge: NODE_BADGES[n.state],
      attempts: n.attempts,
      error: n.error,
    })),
    stages: doc.stages.map((stage) => [...stage]),
    stale: false,
  };
}

/** A failed poll keeps the last good view and flags it as stale. */
export function markStale(previous: RunView): RunView {
  return { ...previous, stale: true };
}

export type Scheduler = (fn: () => void, ms: number) => unknown;
export type TimerCancel = (handle: unknown) => void;

export interface RunClient {
  getRun(runId: string): Promise<RunDoc>;
  cancelRun(runId: string): Promise<RunDoc>;
}

/** Polls one run every POLL_INTERVAL_MS until it reports a terminal state.
 *
 * The scheduler is injectable so tests drive the clock; at most one poll
 * is in flight at a time and cancel() issues exactly one cancel request
 * per run no matter how often it is invoked.
 */
export class RunMonitor {
  private view: RunView;
  private timer: unknown = null;
  private stopped = false;
  private cancelIssued = false;
  private polling = false;

  constructor(
    private readonly client: RunClient,
    runId: string,
    private readonly onChange: (view: RunView) => void,
    private readonly schedule: Scheduler =
      (fn, ms) => setTimeout(fn, ms),
    private readonly cancelTimer: TimerCancel =
      (handle) => clearTimeout(handle as Parameters<typeof clearTimeout>[0]),
  ) {
    this.view = initialRunView(runId);
  }

  get current(): RunView {
    return this.view;
  }

  get cancelDisabled(): boolean {
    return this.cancelIssued || this.view.terminal;
  }

  async start(): Promise<void> {
    await this.poll();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      this.cancelTimer(this.timer);
      this.timer = null;
    }
  }

  /** Idempotent: the first click sends POST .../cancel, later clicks no-op. */
  async cancel(): Promise<void> {
    if (this.cancelIssued || this.view.terminal || this.stopped) return;
    this.cancelIssued = true;
    try {
      const doc = await this.client.cancelRun(this.view.runId);
      this.push(reduceRunStatus(this.view, doc));
    } catch {
      this.push(markStale(this.view));
    }
  }

  private async poll(): Promise<void> {
    if (this.stopped || this.polling) return;
    this.polling = true;
    try {
      const doc = await this.client.getRun(this.view.runId);
      this.push(reduceRunStatus(this.view, doc));
    } catch {
      this.push(markStale(this.view));
    } finally {
      this.polling = false;
    }
    if (!this.stopped && !this.view.terminal) {
      this.timer = this.schedule(() => {
        this.timer = null;
        void this.poll();
      }, POLL_INTERVAL_MS);
    }
  }

  private push(view: RunView): void {
    this.view = view;
    this.onChange(view);
  }
}
