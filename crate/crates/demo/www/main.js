import init, { return_probability_curve, spectral_density, vk_ground_state } from "./pkg/intermittency_demo.js";

const PAD = 40;

function frame(canvas, xs, ys, { logx = false, logy = false } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const fx = logx ? Math.log10 : (v) => v;
  const fy = logy ? Math.log10 : (v) => v;
  const X = xs.map(fx), Y = ys.map(fy);
  const [x0, x1] = [Math.min(...X), Math.max(...X)];
  const [y0, y1] = [Math.min(...Y), Math.max(...Y)];
  const sx = (v) => PAD + ((fx(v) - x0) / (x1 - x0 || 1)) * (w - 2 * PAD);
  const sy = (v) => h - PAD - ((fy(v) - y0) / (y1 - y0 || 1)) * (h - 2 * PAD);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(PAD, PAD, w - 2 * PAD, h - 2 * PAD);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  const fmt = (v, log) => (log ? `1e${v.toFixed(1)}` : v.toPrecision(3));
  ctx.fillText(fmt(x0, logx), PAD, h - PAD + 14);
  ctx.fillText(fmt(x1, logx), w - PAD - 30, h - PAD + 14);
  ctx.fillText(fmt(y1, logy), 2, PAD + 4);
  ctx.fillText(fmt(y0, logy), 2, h - PAD);
  return { ctx, sx, sy };
}

function line(canvas, xs, ys, opts) {
  const { ctx, sx, sy } = frame(canvas, xs, ys, opts);
  ctx.strokeStyle = "#1f5fa8";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(ys[i])) : ctx.moveTo(sx(x), sy(ys[i]))));
  ctx.stroke();
}

function bars(canvas, lo, hi, dens) {
  const step = (hi - lo) / dens.length;
  const xs = dens.map((_, i) => lo + (i + 0.5) * step);
  const { ctx, sx, sy } = frame(canvas, [lo, hi], [0, Math.max(...dens)]);
  ctx.fillStyle = "#1f5fa8";
  dens.forEach((d, i) => {
    const a = sx(xs[i] - step / 2), b = sx(xs[i] + step / 2);
    ctx.fillRect(a, sy(d), Math.max(1, b - a - 1), sy(0) - sy(d));
  });
}

function unzip(flat) {
  const xs = [], ys = [];
  for (let i = 0; i < flat.length; i += 2) { xs.push(flat[i]); ys.push(flat[i + 1]); }
  return [xs, ys];
}

function wire(id, run) {
  const box = document.getElementById(id);
  const out = box.querySelector(".out");
  const val = (name) => box.querySelector(`[name=${name}]`).value;
  box.querySelector("button").addEventListener("click", () => {
    out.className = "out";
    out.textContent = "…";
    setTimeout(() => {
      const t = performance.now();
      try {
        const msg = run(val, box.querySelector("canvas"));
        out.textContent = `${msg}  (${(performance.now() - t).toFixed(0)} ms)`;
      } catch (e) {
        out.className = "out err";
        out.textContent = String(e.message ?? e);
      }
    }, 0);
  });
  box.querySelector("button").click();
}

await init();

wire("rp", (v, canvas) => {
  const [ts, ps] = unzip(return_probability_curve(v("family"), +v("n"), +v("b"), +v("seed"), 4));
  line(canvas, ts, ps, { logx: true, logy: true });
  const k = ts.length - 1, j = Math.floor(k * 0.7);
  const slope = Math.log(ps[k] / ps[j]) / Math.log(ts[k] / ts[j]);
  return `t ≤ ${ts[k].toFixed(1)}   late log-log slope ${slope.toFixed(3)}`;
});

wire("dos", (v, canvas) => {
  const d = spectral_density(+v("n"), +v("b"), 1, +v("r"), +v("bins"));
  bars(canvas, d[0], d[1], Array.from(d.slice(2)));
  return `hull [${d[0]}, ${d[1]}]`;
});

wire("vk", (v, canvas) => {
  const g = vk_ground_state(+v("k"), +v("c"), +v("l"), +v("h"), 60);
  const [xs, ps] = unzip(Array.from(g.slice(1)));
  line(canvas, xs, ps);
  return `E0 = ${g[0].toExponential(4)}`;
});
