// View models: turn session state into plain rows/strings for the DOM layer.
// Every numeric string produced here is a formatted copy of a value that
// arrived in an API payload (or a slider's own setting); nothing is computed.

import { CaseDoc, PlanDoc } from "./api.js";
import { SessionState, normalizedWeights } from "./session.js";

export const fmt = {
  similarity: (value: number): string => value.toFixed(4),
  mw: (value: number): string => value.toFixed(3),
  ratio: (value: number): string => value.toFixed(4),
  count: (value: number): string => String(value),
  weight: (value: number): string => value.toFixed(2),
};

export interface RetrievalRow {
  rank: string;
  caseId: string;
  similarity: string;
  lossMw: string;
  lossRatio: string;
  profileSum: string;
  violations: string;
  occurrences: string;
}

/** Rows in exactly the order the service returned them; equal similarities
 * share a displayed rank. */
export function retrievalRows(results: CaseDoc[]): RetrievalRow[] {
  const rows: RetrievalRow[] = [];
  let rank = 0;
  let previous: string | null = null;
  results.forEach((doc, index) => {
    const similarity = fmt.similarity(doc.similarity ?? 0);
    if (similarity !== previous) {
      rank = index + 1;
      previous = similarity;
    }
    rows.push({
      rank: fmt.count(rank),
      caseId: fmt.count(doc.id),
      similarity,
      lossMw: fmt.mw(doc.loss),
      lossRatio: fmt.ratio(doc.metrics.loss_ratio),
      profileSum: fmt.ratio(doc.metrics.profile_sum),
      violations: fmt.count(doc.metrics.violation_count),
      occurrences: fmt.count(doc.occurrences),
    });
  });
  return rows;
}

export function retrievalEmptyText(state: SessionState): string | null {
  if (!state.retrieval.queried) {
    return "adjust the query to search the case base";
  }
  if (state.retrieval.results.length === 0) {
    return "no stored case reaches the similarity threshold";
  }
  return null;
}

export interface WeightBadge {
  attribute: string;
  raw: string;
  normalized: string;
}

/** The weight badges shown beside the sliders: raw slider setting plus its
 * sum-normalized share (the share the service applies to scores). */
export function weightBadges(state: SessionState): WeightBadge[] {
  const raw = state.retrieval.weights;
  const shares = normalizedWeights(raw);
  return (Object.keys(raw) as (keyof typeof raw)[]).map((attribute) => ({
    attribute,
    raw: fmt.weight(raw[attribute]),
    normalized: fmt.weight(shares[attribute]),
  }));
}

export interface PlanCard {
  planId: string;
  source: string;
  status: string;
  openSwitches: string;
  predictedLossMw: string;
  violations: string;
  shedBuses: string;
  similarity: string | null;
  matchedCase: string | null;
  alertSummary: string;
  pending: boolean;
}

export function planCard(plan: PlanDoc): PlanCard {
  return {
    planId: fmt.count(plan.id),
    source: plan.source,
    status: plan.status,
    openSwitches: plan.open_switches.map(fmt.count).join(", "),
    predictedLossMw: fmt.mw(plan.predicted_loss_mw),
    violations: fmt.count(plan.predicted_quality.violation_count),
    shedBuses: plan.shed_buses.length ? plan.shed_buses.map(fmt.count).join(", ") : "none",
    similarity: plan.similarity === null ? null : fmt.similarity(plan.similarity),
    matchedCase: plan.matched_case === null ? null : fmt.count(plan.matched_case),
    alertSummary:
      `${plan.alert.kind}` +
      (plan.alert.failed_buses.length
        ? ` buses ${plan.alert.failed_buses.map(fmt.count).join(", ")}`
        : "") +
      (plan.alert.failed_branches.length
        ? ` branches ${plan.alert.failed_branches.map(fmt.count).join(", ")}`
        : ""),
    pending: plan.status === "pending_approval",
  };
}

export function planCards(state: SessionState): PlanCard[] {
  return [...state.plans.values()].map(planCard);
}

export interface NetworkSummary {
  networkId: string;
  buses: string;
  branches: string;
  lossMw: string;
  violations: string;
  openSwitches: string;
}

export function networkSummary(state: SessionState): NetworkSummary | null {
  const net = state.network;
  if (!net) return null;
  return {
    networkId: net.network_id,
    buses: fmt.count(net.buses),
    branches: fmt.count(net.branches),
    lossMw: fmt.mw(net.loss_mw),
    violations: fmt.count(net.quality.violation_count),
    openSwitches: net.open_switches.map(fmt.count).join(", "),
  };
}
