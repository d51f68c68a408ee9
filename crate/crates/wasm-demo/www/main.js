import init, { tcl_curve, Descent } from "./pkg/toprel_wasm_demo.js";

const $ = (id) => document.getElementById(id);

function axes(ctx, w, h, pad) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, pad / 2);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad / 2, h - pad);
  ctx.stroke();
}

function plotLines(canvas, series, { xmin, xmax, ymin, ymax }) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  axes(ctx, w, h, pad);
  const sx = (x) => pad + ((x - xmin) / (xmax - xmin || 1)) * (w - 1.5 * pad);
  const sy = (y) => h - pad - ((y - ymin) / (ymax - ymin || 1)) * (h - 1.5 * pad);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(ymax.toPrecision(3), 2, sy(ymax) + 4);
  ctx.fillText(ymin.toPrecision(3), 2, sy(ymin));
  ctx.fillText(String(xmin), sx(xmin), h - pad + 14);
  ctx.fillText(String(xmax), sx(xmax) - 20, h - pad + 14);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.setLineDash(s.dash || []);
    ctx.beginPath();
    s.xs.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(s.ys[i])) : ctx.moveTo(sx(x), sy(s.ys[i]))));
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function bindOutputs() {
  for (const input of document.querySelectorAll("input[type=range]")) {
    const out = input.parentElement.querySelector("output");
    const sync = () => (out.textContent = input.value);
    input.addEventListener("input", sync);
    sync();
  }
}

function drawTcl() {
  const rows = tcl_curve(+$("eta").value, +$("gamma").value, +$("beta-plus").value,
    +$("beta-minus").value, +$("held").value, 101);
  const xs = [], pos = [], neg = [], tot = [];
  for (let i = 0; i < rows.length; i += 4) {
    xs.push(rows[i]); pos.push(rows[i + 1]); neg.push(rows[i + 2]); tot.push(rows[i + 3]);
  }
  const all = pos.concat(neg, tot);
  plotLines($("tcl-plot"), [
    { xs, ys: pos, color: "#1f77b4" },
    { xs, ys: neg, color: "#d62728" },
    { xs, ys: tot, color: "#555", dash: [5, 4] },
  ], { xmin: 0, xmax: 1, ymin: Math.min(0, ...all), ymax: Math.max(...all) });
}

let lab = null;

function resetDescent() {
  try {
    lab = new Descent(+$("seed").value >>> 0, +$("dim").value, +$("sigma").value,
      $("strategy").value, +$("step").value);
    $("descent-info").classList.remove("err");
  } catch (e) {
    lab = null;
    $("descent-info").textContent = String(e);
    $("descent-info").classList.add("err");
    return;
  }
  drawDescent();
}

function drawDescent() {
  if (!lab) return;
  const losses = Array.from(lab.losses());
  const spreads = Array.from(lab.mean_spreads());
  const rel = (v) => v.map((x) => x / (v[0] || 1));
  const xs = losses.map((_, i) => i);
  const ys = rel(losses).concat(rel(spreads));
  plotLines($("descent-plot"), [
    { xs, ys: rel(losses), color: "#1f77b4" },
    { xs, ys: rel(spreads), color: "#2ca02c" },
  ], { xmin: 0, xmax: Math.max(1, xs.length - 1), ymin: Math.min(...ys), ymax: Math.max(...ys) });
  const groups = Array.from(lab.group_spreads()).map((w) => w.toExponential(3)).join("  ");
  $("descent-info").textContent =
    `iteration ${lab.iteration()}   loss ${losses.at(-1).toExponential(6)}   ` +
    `mean W_mean-std ${spreads.at(-1).toExponential(4)} (start ${spreads[0].toExponential(4)})\n` +
    `per-group W_mean-std: ${groups}`;
  drawHist();
}

function drawHist() {
  if (!lab) return;
  const bins = +$("bins").value, r = +$("range").value;
  const counts = Array.from(lab.histogram(bins, -r, r));
  const canvas = $("hist-plot");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  axes(ctx, w, h, pad);
  const max = Math.max(1, ...counts);
  const bw = (w - 1.5 * pad) / bins;
  ctx.fillStyle = "#9467bd";
  counts.forEach((c, i) => {
    const bh = (c / max) * (h - 1.5 * pad);
    ctx.fillRect(pad + i * bw + 1, h - pad - bh, bw - 2, bh);
  });
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(String(-r), pad, h - pad + 14);
  ctx.fillText(String(r), w - pad, h - pad + 14);
  ctx.fillText(String(max), 2, pad / 2 + 8);
}

await init();
bindOutputs();
for (const id of ["eta", "gamma", "beta-plus", "beta-minus", "held"]) $(id).addEventListener("input", drawTcl);
for (const id of ["bins", "range"]) $(id).addEventListener("input", drawHist);
$("reset").addEventListener("click", resetDescent);
$("run").addEventListener("click", () => {
  if (!lab) return;
  try { lab.step(100); } catch (e) { $("descent-info").textContent = String(e); }
  drawDescent();
});
drawTcl();
resetDescent();
