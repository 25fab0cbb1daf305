// Console session state, event-sourced: every change is an event carrying
// the API payload that caused it, the visible state is a pure fold over the
// log, and replaying the log reproduces the state exactly.

import {
  ApiClient,
  ApiError,
  CaseDoc,
  NetworkStateDoc,
  PlanDoc,
  RetrieveRequest,
  Weights,
} from "./api.js";

export interface RetrievalPanel {
  threshold: number;
  weights: Weights;
  problemKind: string;
  attributes: { loss_ratio: number; profile_sum: number; violation_count: number };
  results: CaseDoc[];
  queried: boolean;
}

export interface Notice {
  level: "info" | "error";
  code: string;
  text: string;
}

export type SessionEvent =
  | { seq: number; kind: "network_loaded"; state: NetworkStateDoc }
  | { seq: number; kind: "state_refreshed"; state: NetworkStateDoc }
  | { seq: number; kind: "plan_received"; plan: PlanDoc }
  | { seq: number; kind: "plan_refreshed"; plan: PlanDoc }
  | { seq: number; kind: "retrieval_updated"; request: RetrieveRequest; results: CaseDoc[] }
  | { seq: number; kind: "notice"; notice: Notice };

export interface SessionState {
  networkId: string | null;
  network: NetworkStateDoc | null;
  plans: Map<number, PlanDoc>;
  retrieval: RetrievalPanel;
  notices: Notice[];
}

export const DEFAULT_RETRIEVAL: RetrievalPanel = {
  threshold: 0.92,
  weights: { loss_ratio: 1, profile_sum: 1, violation_count: 1 },
  problemKind: "bus_fault",
  attributes: { loss_ratio: 0, profile_sum: 0, violation_count: 0 },
  results: [],
  queried: false,
};

export function initialState(): SessionState {
  return {
    networkId: null,
    network: null,
    plans: new Map(),
    retrieval: { ...DEFAULT_RETRIEVAL },
    notices: [],
  };
}

export function applyEvent(state: SessionState, event: SessionEvent): SessionState {
  switch (event.kind) {
    case "network_loaded":
    case "state_refreshed": {
      return { ...state, networkId: event.state.network_id, network: event.state };
    }
    case "plan_received":
    case "plan_refreshed": {
      const plans = new Map(state.plans);
      plans.set(event.plan.id, event.plan);
      return { ...state, plans };
    }
    case "retrieval_updated": {
      return {
        ...state,
        retrieval: {
          threshold: event.request.threshold,
          weights: event.request.weights,
          problemKind: event.request.problem_kind,
          attributes: event.request.attributes,
          results: event.results,
          queried: true,
        },
      };
    }
    case "notice": {
      return { ...state, notices: [...state.notices, event.notice] };
    }
  }
}

export function rebuild(log: SessionEvent[]): SessionState {
  return log.reduce(applyEvent, initialState());
}

/** Sum-normalized weights for display next to scores (never sent upstream
 * in place of the raw slider values, never used to compute a score). */
export function normalizedWeights(weights: Weights): Weights {
  const total = weights.loss_ratio + weights.profile_sum + weights.violation_count;
  if (total <= 0) {
    return { loss_ratio: 0, profile_sum: 0, violation_count: 0 };
  }
  return {
    loss_ratio: weights.loss_ratio / total,
    profile_sum: weights.profile_sum / total,
    violation_count: weights.violation_count / total,
  };
}

type Unstamped<T> = T extends { seq: number } ? Omit<T, "seq"> : never;

export class ConsoleSession {
  state: SessionState = initialState();
  readonly log: SessionEvent[] = [];
  private seq = 0;

  constructor(private readonly client: ApiClient) {}

  private dispatch(event: Unstamped<SessionEvent>): void {
    const stamped = { ...event, seq: ++this.seq } as SessionEvent;
    this.log.push(stamped);
    this.state = applyEvent(this.state, stamped);
  }

  private noticeFrom(error: unknown): Notice {
    if (error instanceof ApiError) {
      return { level: "error", code: error.code, text: error.message };
    }
    return { level: "error", code: "Unreachable", text: "service unreachable" };
  }

  async loadNetwork(format: "cdf" | "native", content: string): Promise<void> {
    try {
      const { network_id } = await this.client.uploadNetwork(format, content);
      const state = await this.client.networkState(network_id);
      this.dispatch({ kind: "network_loaded", state });
    } catch (error) {
      this.dispatch({ kind: "notice", notice: this.noticeFrom(error) });
    }
  }

  async refreshNetwork(): Promise<void> {
    if (!this.state.networkId) return;
    try {
      const state = await this.client.networkState(this.state.networkId);
      this.dispatch({ kind: "state_refreshed", state });
    } catch (error) {
      this.dispatch({ kind: "notice", notice: this.noticeFrom(error) });
    }
  }

  /** Submit an alert. Fault alerts must name at least one element; that is
   * the only client-side validation (unknown ids are the server's call). */
  async injectFault(kind: string, failedBuses: number[], failedBranches: number[]): Promise<void> {
    if (!this.state.networkId) {
      this.dispatch({
        kind: "notice",
        notice: { level: "error", code: "NoNetwork", text: "load a network first" },
      });
      return;
    }
    if (kind === "fault" && failedBuses.length === 0 && failedBranches.length === 0) {
      this.dispatch({
        kind: "notice",
        notice: {
          level: "error",
          code: "ValidationError",
          text: "a fault alert needs at least one failed bus or branch",
        },
      });
      return;
    }
    try {
      const plan = await this.client.submitAlert(
        this.state.networkId,
        kind,
        failedBuses,
        failedBranches,
      );
      this.dispatch({ kind: "plan_received", plan });
    } catch (error) {
      this.dispatch({ kind: "notice", notice: this.noticeFrom(error) });
    }
  }

  /** Any retrieval-panel change (threshold, a weight slider, attributes)
   * re-queries the service; the console never rescoring results locally. */
  async updateRetrieval(panel: Partial<RetrievalPanel>): Promise<void> {
    const merged = { ...this.state.retrieval, ...panel };
    const request: RetrieveRequest = {
      attributes: merged.attributes,
      weights: merged.weights,
      threshold: merged.threshold,
      problem_kind: merged.problemKind,
      ...(this.state.networkId ? { network_id: this.state.networkId } : {}),
    };
    try {
      const { results } = await this.client.retrieve(request);
      this.dispatch({ kind: "retrieval_updated", request, results });
    } catch (error) {
      this.dispatch({ kind: "notice", notice: this.noticeFrom(error) });
    }
  }

  async decide(planId: number, decision: "approve" | "reject"): Promise<void> {
    try {
      const plan = await this.client.approval(planId, decision);
      this.dispatch({ kind: "plan_refreshed", plan });
      await this.refreshNetwork();
    } catch (error) {
      this.dispatch({ kind: "notice", notice: this.noticeFrom(error) });
      if (error instanceof ApiError && error.code === "NotPending") {
        // stale view: pull the server's actual status
        try {
          const plan = await this.client.plan(planId);
          this.dispatch({ kind: "plan_refreshed", plan });
        } catch {
          // the notice above already reports the conflict
        }
      }
    }
  }

  async pollPlans(): Promise<void> {
    for (const planId of this.state.plans.keys()) {
      try {
        const plan = await this.client.plan(planId);
        if (plan.status !== this.state.plans.get(planId)?.status) {
          this.dispatch({ kind: "plan_refreshed", plan });
        }
      } catch {
        // transient polling errors are not user-facing state transitions
      }
    }
  }
}
