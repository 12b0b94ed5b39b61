/** Document shapes returned by the node's HTTP API (/api/v1). */

export interface PrincipalDoc {
  id: string;
  username: string;
  roles: string[];
  disabled: boolean;
  created_at: string;
}

export interface LoginResponse {
  token: string;
  expires_at: number;
  principal: PrincipalDoc;
}

export interface InstanceDoc {
  sop_uid: string;
  series_uid: string;
  study_uid: string;
  patient_id: string;
  attrs: Record<string, string>;
  sha256: string;
  size: number;
  received_at: string;
  tags: string[];
}

export interface SeriesDoc {
  series_uid: string;
  study_uid: string;
  instance_count: number;
  tags: string[];
  representative: InstanceDoc;
  preview_url: string;
}

export interface StudyDoc {
  study_uid: string;
  series_count: number;
  instance_count: number;
  representative: InstanceDoc;
}

export interface InstancePage {
  level: "instance";
  count: number;
  items: InstanceDoc[];
}

export interface SeriesPage {
  level: "series";
  count: number;
  items: SeriesDoc[];
}

export interface StudyPage {
  level: "study";
  count: number;
  items: StudyDoc[];
}

export interface AggregateResponse {
  attr: string;
  values: Record<string, number>;
  total: number;
}

export interface CohortDoc {
  name: string;
  series: string[];
  series_count: number;
  query: EncodedQuery;
  created_at: string;
  created_by: string;
}

export interface WorkflowNodeDoc {
  id: string;
  operator: string;
  params: Record<string, unknown>;
  inputs: { from_node: string; slot: string }[];
}

export interface WorkflowDoc {
  name: string;
  source: string;
  version: string;
  retry_limit: number;
  nodes: WorkflowNodeDoc[];
}

/** Wire states are lowercase; the console renders capitalized badges. */
export type NodeWireState =
  | "pending" | "ready" | "running" | "succeeded" | "failed" | "skipped";
export type RunWireState =
  | "pending" | "running" | "succeeded" | "failed" | "canceled";

export interface RunNodeDoc {
  id: string;
  operator: string;
  state: NodeWireState;
  attempts: number;
  started_at: string | null;
  ended_at: string | null;
  error: string | null;
}

export interface RunSummaryDoc {
  run_id: string;
  workflow: string;
  cohort: string;
  initiated_by: string;
  state: RunWireState;
  created_at: string;
}

export interface RunDoc extends RunSummaryDoc {
  cancel_requested: boolean;
  nodes: RunNodeDoc[];
  stages: string[][];
}

export interface ExtensionDoc {
  name: string;
  version: string;
  workflows: string[];
  operators: string[];
  ui_root: string | null;
  installed_at: string;
}

export interface LinkDoc {
  link_id: string;
  local_instance_id: string;
  remote_instance_id: string;
  remote_endpoint: string;
  capabilities: string[];
  established_at: string;
}

export interface FedJobDoc {
  job_id: string;
  workflow: string;
  participants: string[];
  rounds: number;
  lr: number;
  init_params: number[];
  quorum: number | null;
  status: string;
  final_params: number[] | null;
  history: {
    round: number;
    aggregated: number[];
    results: { participant: string; sample_count: number }[];
  }[];
}

export interface AuditEventDoc {
  seq: number;
  time: string;
  principal: string;
  action: string;
  resource: string;
  outcome: string;
  prev_hash: string;
  hash: string;
}

export interface AuditResponse {
  events: AuditEventDoc[];
  first_invalid: number | null;
}

export interface ErrorDoc {
  error_code: string;
  message: string;
}

/** Query encoding accepted by GET /instances, /aggregate, POST /cohorts. */
export type EncodedPredicate =
  | { kind: "equals"; attr: string; value: string }
  | { kind: "prefix"; attr: string; value: string }
  | { kind: "date_range"; attr: string; start: string; end: string }
  | { kind: "in"; attr: string; values: string[] }
  | { kind: "has_tag"; tag: string };

export interface EncodedQuery {
  predicates: EncodedPredicate[];
}
