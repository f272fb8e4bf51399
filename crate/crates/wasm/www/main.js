import init, { simulate_epidemic, equivalent_trajectories, manifold } from "./pkg/sirid_wasm.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#c0392b", "#2471a3", "#229954", "#7d3c98"];

function params() {
  const num = (id) => Number($(id).value);
  return JSON.stringify({
    beta_r: num("beta_r"), beta_u: num("beta_u"), p: num("p"), pi: num("pi"),
    gamma: num("gamma"), n: Math.round(num("n")), i0: num("i0"),
  });
}

// lines: [{x, y, color, dashed, label}]
function plot(canvas, lines, xlabel) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 44;
  ctx.clearRect(0, 0, w, h);
  const xs = lines.flatMap((l) => l.x), ys = lines.flatMap((l) => l.y);
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  const y0 = Math.min(0, ...ys), y1 = Math.max(...ys) * 1.05 || 1;
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad + -((y - y0) / (y1 - y0)) * (h - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.beginPath();
  ctx.moveTo(pad, pad / 2);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad / 2, h - pad);
  ctx.stroke();
  for (let i = 0; i <= 4; i++) {
    const xv = x0 + ((x1 - x0) * i) / 4, yv = y0 + ((y1 - y0) * i) / 4;
    ctx.fillText(+xv.toPrecision(3), sx(xv) - 8, h - pad + 14);
    ctx.fillText(+yv.toPrecision(3), 2, sy(yv) + 4);
  }
  ctx.fillText(xlabel, w / 2, h - 8);

  for (const l of lines) {
    ctx.strokeStyle = l.color;
    ctx.lineWidth = l.width ?? 1.5;
    ctx.setLineDash(l.dashed ? [6, 4] : []);
    ctx.beginPath();
    l.x.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(l.y[i])) : ctx.moveTo(sx(x), sy(l.y[i]))));
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function key(el, lines) {
  el.innerHTML = lines
    .map((l) => `<span style="color:${l.color}">${l.dashed ? "- -" : "&mdash;"} ${l.label}</span>`)
    .join("");
}

function guard(out, f) {
  try {
    out.classList.remove("err");
    f();
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e);
  }
}

let lastEpidemic = null;

function runSimulation() {
  guard($("sim-out"), () => {
    const r = JSON.parse(simulate_epidemic(params(), Number($("seed").value) >>> 0));
    lastEpidemic = r;
    const lines = [
      { x: r.stochastic.t, y: r.stochastic.ir, color: COLORS[0], label: "reported infectious" },
      { x: r.stochastic.t, y: r.stochastic.iu, color: COLORS[1], label: "unreported infectious" },
      { x: r.deterministic.t, y: r.deterministic.ir, color: COLORS[0], dashed: true, label: "deterministic Ir" },
      { x: r.deterministic.t, y: r.deterministic.iu, color: COLORS[1], dashed: true, label: "deterministic Iu" },
    ];
    plot($("sim-plot"), lines, "time");
    key($("sim-key"), lines);
    const rho = r.rho_hat === null ? "n/a" : r.rho_hat.toFixed(4);
    $("sim-out").textContent =
      `${r.events} events; reported final size ${r.reported_final_size.toFixed(4)} ` +
      `(deterministic ${r.predicted_final_size.toFixed(4)}); fitted growth rate ${rho} (model ${r.rho.toFixed(4)})`;
  });
}

function runEquivalent() {
  guard($("eq-out"), () => {
    const r = JSON.parse(equivalent_trajectories(params(), $("pin-kind").value, Number($("pin-value").value), 30));
    const a = r.base_path, b = r.equivalent_path;
    const lines = [
      { x: a.t, y: a.ir, color: COLORS[0], width: 4, label: "Ir, base" },
      { x: b.t, y: b.ir, color: COLORS[3], dashed: true, label: "Ir, equivalent" },
      { x: a.t, y: a.iu, color: COLORS[1], label: "Iu, base" },
      { x: b.t, y: b.iu, color: COLORS[2], dashed: true, label: "Iu, equivalent" },
    ];
    plot($("eq-plot"), lines, "time");
    key($("eq-key"), lines);
    const e = r.equivalent;
    const beta = e.p * e.beta_r + (1 - e.p) * e.beta_u;
    $("eq-out").textContent =
      `equivalent set: p = ${e.p.toFixed(4)}, pi = ${e.pi.toFixed(4)}, beta* = ${beta.toFixed(4)}\n` +
      `max |Ir difference| ${r.max_abs_diff_ir.toExponential(2)}, max |S difference| ${r.max_abs_diff_s.toFixed(1)}`;
  });
}

function runScan() {
  guard($("scan-out"), () => {
    const gamma = Number($("gamma").value);
    const rows = JSON.parse(manifold(Number($("rho").value), Number($("zr").value), gamma, 101));
    if (!rows.length) throw new Error("no admissible parameter sets");
    const pi = rows.map((r) => r.pi);
    const lines = [
      { x: pi, y: rows.map((r) => r.p), color: COLORS[0], label: "p" },
      { x: pi, y: rows.map((r) => r.beta_star / rows[rows.length - 1].beta_star), color: COLORS[1], label: "beta* (relative to its largest value)" },
    ];
    plot($("scan-plot"), lines, "immune fraction pi");
    key($("scan-key"), lines);
    const first = rows[0], last = rows[rows.length - 1];
    $("scan-out").textContent =
      `${rows.length} sets; pi from ${first.pi.toFixed(3)} to ${last.pi.toFixed(3)}, ` +
      `p from ${first.p.toFixed(3)} to ${last.p.toFixed(3)}, beta* from ${first.beta_star.toFixed(3)} to ${last.beta_star.toFixed(3)}`;
  });
}

await init();
$("run-sim").onclick = runSimulation;
$("next-sim").onclick = () => {
  $("seed").value = Number($("seed").value) + 1;
  runSimulation();
};
$("run-eq").onclick = runEquivalent;
$("run-scan").onclick = runScan;
$("from-params").onclick = () => {
  runSimulation();
  if (lastEpidemic) {
    $("rho").value = lastEpidemic.rho.toFixed(4);
    $("zr").value = lastEpidemic.predicted_final_size.toFixed(4);
    runScan();
  }
};
runSimulation();
runEquivalent();
runScan();
