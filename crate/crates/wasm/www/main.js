import init, { smd_phase, tracking, expected_cost_map } from "./pkg/pike_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

const COLORS = {
  truth: "#222",
  prior: "#999",
  physics_informed: "#1f77b4",
  data_driven: "#d62728",
  target: "#2ca02c",
};

// Maps data coordinates to a canvas with a margin and equal-ish padding.
function frame(canvas, xs, ys, pad = 0.08) {
  const m = 40;
  let [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const dx = (x1 - x0 || 1) * pad, dy = (y1 - y0 || 1) * pad;
  x0 -= dx; x1 += dx; y0 -= dy; y1 += dy;
  const w = canvas.width - 2 * m, h = canvas.height - 2 * m;
  return {
    px: (x) => m + ((x - x0) / (x1 - x0)) * w,
    py: (y) => canvas.height - m - ((y - y0) / (y1 - y0)) * h,
    inv: (cx, cy) => [x0 + ((cx - m) / w) * (x1 - x0), y0 + ((canvas.height - m - cy) / h) * (y1 - y0)],
    bounds: [x0, x1, y0, y1],
  };
}

function axes(ctx, f, xlabel, ylabel) {
  const [x0, x1, y0, y1] = f.bounds;
  ctx.strokeStyle = "#ccc";
  ctx.lineWidth = 1;
  ctx.beginPath();
  if (x0 < 0 && x1 > 0) { ctx.moveTo(f.px(0), f.py(y0)); ctx.lineTo(f.px(0), f.py(y1)); }
  if (y0 < 0 && y1 > 0) { ctx.moveTo(f.px(x0), f.py(0)); ctx.lineTo(f.px(x1), f.py(0)); }
  ctx.stroke();
  ctx.fillStyle = "#555";
  ctx.font = "12px system-ui";
  ctx.fillText(`${xlabel} ∈ [${x0.toFixed(2)}, ${x1.toFixed(2)}]`, 45, ctx.canvas.height - 12);
  ctx.save();
  ctx.translate(14, ctx.canvas.height - 45);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(`${ylabel} ∈ [${y0.toFixed(2)}, ${y1.toFixed(2)}]`, 0, 0);
  ctx.restore();
}

function polyline(ctx, f, pts, color, width = 2, dash = []) {
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.setLineDash(dash);
  ctx.beginPath();
  pts.forEach((p, i) => (i ? ctx.lineTo(f.px(p[0]), f.py(p[1])) : ctx.moveTo(f.px(p[0]), f.py(p[1]))));
  ctx.stroke();
  ctx.setLineDash([]);
}

function dots(ctx, f, pts, color, r = 2) {
  ctx.fillStyle = color;
  for (const p of pts) {
    ctx.beginPath();
    ctx.arc(f.px(p[0]), f.py(p[1]), r, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function showError(el, e) {
  el.innerHTML = `<span class="err">${String(e.message ?? e)}</span>`;
}

// Phase portrait

let phaseX0 = [0.1, 0.1];
let phaseFrame = null;

function runPhase() {
  const out = $("p-out");
  try {
    const t = performance.now();
    const r = JSON.parse(smd_phase(num("p-m"), num("p-sigma"), num("p-lambda"), $("p-limited").checked,
      num("p-seed"), phaseX0[0], phaseX0[1], num("p-steps")));
    const ms = performance.now() - t;
    const canvas = $("p-canvas"), ctx = canvas.getContext("2d");
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const all = r.curves.flatMap((c) => c.states).concat(r.samples);
    const f = frame(canvas, all.map((p) => p[0]), all.map((p) => p[1]));
    phaseFrame = f;
    axes(ctx, f, "position", "velocity");
    dots(ctx, f, r.samples, "rgba(0,0,0,0.15)", 1.5);
    for (const c of r.curves) {
      polyline(ctx, f, c.states, COLORS[c.label], c.label === "truth" ? 3 : 2, c.label === "prior" ? [5, 4] : []);
    }
    dots(ctx, f, [phaseX0], "#000", 4);
    $("p-legend").innerHTML = r.curves
      .map((c) => `<span><i style="background:${COLORS[c.label]}"></i>${c.label}` +
        (c.error === null ? "" : ` (cum. error ${c.error.toExponential(2)})`) + "</span>")
      .join("");
    out.textContent = `x0 = [${phaseX0.map((v) => v.toFixed(3)).join(", ")}]\n${ms.toFixed(0)} ms`;
  } catch (e) {
    showError(out, e);
  }
}

$("p-canvas").addEventListener("click", (ev) => {
  if (!phaseFrame) return;
  const rect = ev.target.getBoundingClientRect();
  phaseX0 = phaseFrame.inv(ev.clientX - rect.left, ev.clientY - rect.top);
  runPhase();
});

// Tracking

let runs = [];

function drawTracking() {
  const canvas = $("t-canvas"), ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!runs.length) return;
  const all = runs.flatMap((r) => r.trajectory.concat(r.targets));
  const f = frame(canvas, all.map((p) => p[0]), all.map((p) => p[1]));
  axes(ctx, f, "x₁", "x₂");
  dots(ctx, f, runs[0].targets, COLORS.target, 3);
  runs.forEach((r, i) => {
    const color = r.mode === "physics_informed" ? COLORS.physics_informed : COLORS.data_driven;
    polyline(ctx, f, r.trajectory, color, 2, i % 2 ? [6, 3] : []);
  });
}

function runTracking() {
  const out = $("t-out");
  out.textContent = "running...";
  setTimeout(() => {
    try {
      const r = JSON.parse(tracking($("t-mode").value, num("t-m"), num("t-seed"), num("t-gain")));
      runs.push(r);
      drawTracking();
      out.textContent = runs
        .map((r) => `${r.mode} M=${r.samples}: mse ${r.mean_squared_error.toExponential(3)}, ${r.wall_clock_ms.toFixed(0)} ms`)
        .join("\n");
    } catch (e) {
      showError(out, e);
    }
  }, 10);
}

// Cost map

function runCostMap() {
  const out = $("c-out");
  try {
    const r = JSON.parse(expected_cost_map($("c-mode").value, num("c-m"), 0, num("c-px"), num("c-py"),
      num("c-th"), num("c-tx"), num("c-ty")));
    const [rows, cols] = r.shape;
    const canvas = $("c-canvas"), ctx = canvas.getContext("2d");
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const m = 50, cw = (canvas.width - 2 * m) / cols, ch = (canvas.height - 2 * m) / rows;
    const lo = Math.min(...r.costs), hi = Math.max(...r.costs);
    r.costs.forEach((c, k) => {
      const i = Math.floor(k / cols), j = k % cols;
      const t = hi > lo ? (c - lo) / (hi - lo) : 0;
      ctx.fillStyle = `hsl(${240 - 240 * t}, 70%, ${35 + 30 * t}%)`;
      ctx.fillRect(m + j * cw, canvas.height - m - (i + 1) * ch, cw, ch);
    });
    const ci = Math.floor(r.chosen_index / cols), cj = r.chosen_index % cols;
    ctx.strokeStyle = "#fff";
    ctx.lineWidth = 3;
    ctx.strokeRect(m + cj * cw, canvas.height - m - (ci + 1) * ch, cw, ch);
    ctx.fillStyle = "#555";
    ctx.font = "12px system-ui";
    ctx.fillText("turn rate u₂ →", m, canvas.height - 20);
    ctx.save();
    ctx.translate(20, canvas.height - m);
    ctx.rotate(-Math.PI / 2);
    ctx.fillText("speed u₁ →", 0, 0);
    ctx.restore();
    const u = r.actions[r.chosen_index];
    out.textContent =
      `chosen u = [${u.map((v) => v.toFixed(3)).join(", ")}]\n` +
      `expected cost ${r.costs[r.chosen_index].toExponential(3)}\n` +
      `range [${lo.toExponential(2)}, ${hi.toExponential(2)}]\n` +
      `predicted next x = [${r.predicted_next.map((v) => v.toFixed(3)).join(", ")}]`;
  } catch (e) {
    showError(out, e);
  }
}

await init();
$("p-run").onclick = runPhase;
$("t-run").onclick = runTracking;
$("t-clear").onclick = () => { runs = []; drawTracking(); $("t-out").textContent = ""; };
$("c-run").onclick = runCostMap;
runPhase();
