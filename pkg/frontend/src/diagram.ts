// Schematic node-link rendering of the operating topology as an SVG string.
// Buses sit on a circle; closed branches are solid, open switches dashed.

import { GraphDoc } from "./api.js";

const SIZE = 480;
const RADIUS = 190;

export function topologySvg(graph: GraphDoc, openSwitches: number[]): string {
  const open = new Set(openSwitches);
  const center = SIZE / 2;
  const position = new Map<number, { x: number; y: number }>();
  graph.buses.forEach((bus, index) => {
    const angle = (2 * Math.PI * index) / graph.buses.length - Math.PI / 2;
    position.set(bus.id, {
      x: center + RADIUS * Math.cos(angle),
      y: center + RADIUS * Math.sin(angle),
    });
  });

  const lines = graph.branches.map((branch) => {
    const a = position.get(branch.from_bus);
    const b = position.get(branch.to_bus);
    if (!a || !b) return "";
    const dashed = open.has(branch.id);
    return (
      `<line x1="${a.x.toFixed(1)}" y1="${a.y.toFixed(1)}" ` +
      `x2="${b.x.toFixed(1)}" y2="${b.y.toFixed(1)}" ` +
      `stroke="${dashed ? "#b5893c" : "#2f6f4f"}" stroke-width="${dashed ? 1.5 : 2.5}"` +
      (dashed ? ` stroke-dasharray="6 5" class="open-switch"` : ` class="closed-branch"`) +
      ` data-branch="${branch.id}"/>`
    );
  });

  const nodes = graph.buses.map((bus) => {
    const p = position.get(bus.id)!;
    const fill = bus.kind === "slack" ? "#913030" : bus.kind === "PV" ? "#2b5d8a" : "#444";
    return (
      `<circle cx="${p.x.toFixed(1)}" cy="${p.y.toFixed(1)}" r="9" fill="${fill}" ` +
      `data-bus="${bus.id}"/>` +
      `<text x="${p.x.toFixed(1)}" y="${(p.y + 3.5).toFixed(1)}" text-anchor="middle" ` +
      `font-size="8" fill="#fff">${bus.id}</text>`
    );
  });

  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${SIZE} ${SIZE}" ` +
    `width="${SIZE}" height="${SIZE}" role="img" aria-label="operating topology">` +
    lines.join("") +
    nodes.join("") +
    `</svg>`
  );
}
