// Typed client for the reconfiguration service. The fetch implementation is
// injected so tests can run against a scripted mock; the console never
// computes similarity or power-flow numbers itself.

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface QualityDoc {
  profile_sum: number;
  violation_count: number;
  loss_ratio: number;
}

export interface AlertDoc {
  kind: string;
  failed_buses: number[];
  failed_branches: number[];
}

export interface PlanDoc {
  id: number;
  network_id: string;
  source: "cbr_reuse" | "hatsga";
  status: "pending_approval" | "applied" | "rejected";
  open_switches: number[];
  predicted_loss_mw: number;
  predicted_quality: QualityDoc;
  matched_case: number | null;
  similarity: number | null;
  shed_buses: number[];
  evaluations: number;
  alert: AlertDoc;
}

export interface CaseDoc {
  id: number;
  problem: { kind: string; affected_buses: number[]; affected_branches: number[] };
  open_switches: number[];
  loss: number;
  metrics: QualityDoc;
  occurrences: number;
  similarity?: number;
}

export interface GraphDoc {
  buses: { id: number; kind: string }[];
  branches: { id: number; from_bus: number; to_bus: number }[];
}

export interface NetworkStateDoc {
  network_id: string;
  buses: number;
  branches: number;
  open_switches: number[];
  loss_mw: number;
  quality: QualityDoc;
  graph: GraphDoc;
}

export interface Weights {
  loss_ratio: number;
  profile_sum: number;
  violation_count: number;
}

export interface RetrieveRequest {
  network_id?: string;
  attributes: { loss_ratio: number; profile_sum: number; violation_count: number };
  weights: Weights;
  threshold: number;
  limit?: number;
  problem_kind: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function unwrap<T>(response: Response): Promise<T> {
  const body = await response.json();
  if (!response.ok) {
    throw new ApiError(response.status, body.code ?? "Error", body.message ?? "request failed");
  }
  return body as T;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike,
  ) {}

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    }).then((r) => unwrap<T>(r));
  }

  private get<T>(path: string): Promise<T> {
    return this.fetchImpl(`${this.baseUrl}${path}`).then((r) => unwrap<T>(r));
  }

  uploadNetwork(format: "cdf" | "native", content: string): Promise<{ network_id: string }> {
    return this.post("/networks", { format, content });
  }

  networkState(networkId: string): Promise<NetworkStateDoc> {
    return this.get(`/networks/${encodeURIComponent(networkId)}/state`);
  }

  submitAlert(
    networkId: string,
    kind: string,
    failedBuses: number[],
    failedBranches: number[],
  ): Promise<PlanDoc> {
    return this.post("/alerts", {
      network_id: networkId,
      kind,
      failed_buses: failedBuses,
      failed_branches: failedBranches,
    });
  }

  retrieve(request: RetrieveRequest): Promise<{ results: CaseDoc[] }> {
    return this.post("/retrieve", request);
  }

  plan(planId: number): Promise<PlanDoc> {
    return this.get(`/plans/${planId}`);
  }

  approval(planId: number, decision: "approve" | "reject"): Promise<PlanDoc> {
    return this.post(`/plans/${planId}/approval`, { decision });
  }

  cases(): Promise<{ count: number; cases: CaseDoc[] }> {
    return this.get("/cases");
  }
}
