import init, { harmonic, heat_decay, wave_snapshot } from "./pkg/decaylab_web.js";

const $ = (id) => document.getElementById(id);

function grid() {
  return [$("pot").value.trim(), Number($("L").value), Number($("n").value)];
}

// Line plot of several series sharing x; optional log axes.
function plot(canvas, x, series, { logx = false, logy = false } = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 40;
  ctx.clearRect(0, 0, w, h);
  const fx = logx ? Math.log10 : (v) => v;
  const fy = logy ? (v) => Math.log10(Math.max(v, 1e-300)) : (v) => v;
  const xs = x.map(fx);
  const ys = series.flatMap((s) => Array.from(s.y, fy)).filter(Number.isFinite);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y1 === y0) { y1 += 1; y0 -= 1; }
  const px = (v) => pad + ((v - x0) / (x1 - x0)) * (w - 2 * pad);
  const py = (v) => h - pad - ((v - y0) / (y1 - y0)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.font = "12px system-ui";
  const label = (v, log) => (log ? `1e${v.toFixed(1)}` : v.toPrecision(3));
  ctx.fillText(label(x0, logx), pad, h - pad + 16);
  ctx.fillText(label(x1, logx), w - pad - 40, h - pad + 16);
  ctx.fillText(label(y1, logy), 2, pad + 4);
  ctx.fillText(label(y0, logy), 2, h - pad);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    s.y.forEach((v, i) => {
      const X = px(xs[i]), Y = py(fy(v));
      i ? ctx.lineTo(X, Y) : ctx.moveTo(X, Y);
    });
    ctx.stroke();
  }
}

function guarded(out, f) {
  try {
    f();
  } catch (e) {
    $(out).textContent = String(e.message ?? e);
  }
}

function showHarmonic() {
  guarded("o-harmonic", () => {
    const v = harmonic(...grid());
    plot($("c-harmonic"), v.x(), [
      { y: v.psi1(), color: "#1f77b4" },
      { y: v.psi2(), color: "#d62728" },
    ]);
    $("o-harmonic").textContent = `Wronskian k_V = ${v.k_v().toFixed(8)}`;
    v.free();
  });
}

function showHeat() {
  $("o-heat").textContent = "computing…";
  setTimeout(() => guarded("o-heat", () => {
    const d = heat_decay(...grid());
    plot($("c-heat"), d.t(), [
      { y: d.with_potential(), color: "#1f77b4" },
      { y: d.free_flow(), color: "#7f7f7f" },
    ], { logx: true, logy: true });
    $("o-heat").textContent =
      `fitted exponent with V: ${d.exponent().toFixed(3)}   with V = 0: ${d.free_exponent().toFixed(3)}`;
    d.free();
  }), 0);
}

function showWave() {
  const t = Number($("t").value);
  $("t-val").textContent = t;
  guarded("o-wave", () => {
    const s = wave_snapshot(...grid(), t);
    plot($("c-wave"), s.x(), [
      { y: s.wave(), color: "#1f77b4" },
      { y: s.profile(), color: "#2ca02c" },
    ]);
    $("o-wave").textContent = `energy E(t) = ${s.energy().toExponential(4)}`;
    s.free();
  });
}

await init();
$("go-harmonic").onclick = showHarmonic;
$("go-heat").onclick = showHeat;
$("t").oninput = showWave;
showHarmonic();
showWave();
