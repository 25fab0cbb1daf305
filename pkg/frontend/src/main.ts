// Browser bootstrap: wires the DOM controls to the session actions and
// repaints the panels from the view models after every event.

import { ApiClient } from "./api.js";
import { topologySvg } from "./diagram.js";
import {
  networkSummary,
  planCards,
  retrievalEmptyText,
  retrievalRows,
  weightBadges,
} from "./render.js";
import { ConsoleSession } from "./session.js";

const POLL_MS = 3000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function parseIds(text: string): number[] {
  return text
    .split(/[\s,;]+/)
    .filter(Boolean)
    .map(Number)
    .filter((n) => Number.isFinite(n));
}

export function start(): void {
  const baseUrl = (document.body.dataset.serviceUrl ?? "").replace(/\/$/, "");
  const session = new ConsoleSession(new ApiClient(baseUrl, (url, init) => fetch(url, init)));

  const repaint = () => {
    const state = session.state;

    const summary = networkSummary(state);
    el("network-summary").textContent = summary
      ? `${summary.networkId}: ${summary.buses} buses, ${summary.branches} branches, ` +
        `loss ${summary.lossMw} MW, ${summary.violations} violations, ` +
        `open switches [${summary.openSwitches}]`
      : "no network loaded";
    el("diagram").innerHTML = state.network
      ? topologySvg(state.network.graph, state.network.open_switches)
      : "";

    const plansHost = el("plans");
    plansHost.innerHTML = "";
    for (const card of planCards(state)) {
      const div = document.createElement("div");
      div.className = `plan plan-${card.status}`;
      div.innerHTML =
        `<strong>plan ${card.planId}</strong> <span class="chip">${card.status}</span>` +
        `<div>source ${card.source}${card.similarity ? ` (case ${card.matchedCase} @ ${card.similarity})` : ""}</div>` +
        `<div>${card.alertSummary}</div>` +
        `<div>opens [${card.openSwitches}] · loss ${card.predictedLossMw} MW · ` +
        `violations ${card.violations} · shed ${card.shedBuses}</div>`;
      if (card.pending) {
        for (const decision of ["approve", "reject"] as const) {
          const button = document.createElement("button");
          button.textContent = decision;
          button.addEventListener("click", () =>
            session.decide(Number(card.planId), decision).then(repaint),
          );
          div.appendChild(button);
        }
      }
      plansHost.appendChild(div);
    }

    const badgeHost = el("weight-badges");
    badgeHost.textContent = weightBadges(state)
      .map((b) => `${b.attribute}: ${b.raw} (share ${b.normalized})`)
      .join("  ·  ");

    const table = el<HTMLTableElement>("retrieval-table");
    const body = table.tBodies[0];
    body.innerHTML = "";
    for (const row of retrievalRows(state.retrieval.results)) {
      const tr = body.insertRow();
      for (const value of [row.rank, row.caseId, row.similarity, row.lossMw,
                           row.lossRatio, row.profileSum, row.violations, row.occurrences]) {
        tr.insertCell().textContent = value;
      }
    }
    const empty = retrievalEmptyText(state);
    el("retrieval-empty").textContent = empty ?? "";
    table.style.display = empty ? "none" : "table";

    const log = el("event-log");
    log.innerHTML = "";
    for (const event of session.log.slice(-25)) {
      const li = document.createElement("li");
      li.textContent = `#${event.seq} ${event.kind}`;
      log.appendChild(li);
    }
    const notices = state.notices.slice(-3);
    el("notices").textContent = notices
      .map((n) => `[${n.code}] ${n.text}`)
      .join(" — ");
  };

  el("load-network").addEventListener("click", () => {
    const content = el<HTMLTextAreaElement>("network-content").value;
    const format = el<HTMLSelectElement>("network-format").value as "cdf" | "native";
    session.loadNetwork(format, content).then(repaint);
  });

  el("inject-fault").addEventListener("click", () => {
    const kind = el<HTMLSelectElement>("alert-kind").value;
    const buses = parseIds(el<HTMLInputElement>("failed-buses").value);
    const branches = parseIds(el<HTMLInputElement>("failed-branches").value);
    session.injectFault(kind, buses, branches).then(repaint);
  });

  const requery = () => {
    session
      .updateRetrieval({
        threshold: Number(el<HTMLInputElement>("threshold").value),
        problemKind: el<HTMLSelectElement>("problem-kind").value,
        weights: {
          loss_ratio: Number(el<HTMLInputElement>("w-loss").value),
          profile_sum: Number(el<HTMLInputElement>("w-profile").value),
          violation_count: Number(el<HTMLInputElement>("w-violations").value),
        },
        attributes: {
          loss_ratio: Number(el<HTMLInputElement>("q-loss").value),
          profile_sum: Number(el<HTMLInputElement>("q-profile").value),
          violation_count: Number(el<HTMLInputElement>("q-violations").value),
        },
      })
      .then(repaint);
  };
  for (const id of ["threshold", "w-loss", "w-profile", "w-violations",
                    "q-loss", "q-profile", "q-violations"]) {
    el(id).addEventListener("change", requery);
  }
  el("problem-kind").addEventListener("change", requery);

  window.setInterval(() => session.pollPlans().then(repaint), POLL_MS);
  repaint();
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  start();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", start);
}
