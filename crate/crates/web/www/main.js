import init, { jsi_map, hom_curve, detection_budget } from "./pkg/etpa_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function heatmap(canvas, values, n) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(n, n);
  let max = 0;
  for (const v of values) max = Math.max(max, v);
  for (let r = 0; r < n; r++) {
    for (let c = 0; c < n; c++) {
      const t = max > 0 ? values[r * n + c] / max : 0;
      // signal on the vertical axis, low frequencies at the bottom left
      const k = 4 * ((n - 1 - r) * n + c);
      img.data[k] = 255 * Math.min(1, 1.5 * t);
      img.data[k + 1] = 255 * Math.max(0, 1.5 * t - 0.5);
      img.data[k + 2] = 255 * Math.max(0, 3 * t - 2);
      img.data[k + 3] = 255;
    }
  }
  const off = new OffscreenCanvas(n, n);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function curves(canvas, x, series) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 28;
  ctx.clearRect(0, 0, w, h);
  const x0 = x[0], x1 = x[x.length - 1];
  const px = (v) => pad + (w - 2 * pad) * (v - x0) / (x1 - x0);
  const py = (v) => h - pad - (h - 2 * pad) * v / 1.1;
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, py(0)); ctx.lineTo(w - pad, py(0));
  ctx.moveTo(px(0), pad); ctx.lineTo(px(0), h - pad);
  ctx.stroke();
  ctx.fillStyle = "#555";
  ctx.fillText(`${x0.toFixed(0)} fs`, pad, h - 8);
  ctx.fillText(`${x1.toFixed(0)} fs`, w - pad - 40, h - 8);
  ctx.fillText("1", 8, py(1) + 4);
  for (const { y, color } of series) {
    ctx.strokeStyle = color;
    ctx.beginPath();
    y.forEach((v, i) => (i ? ctx.lineTo(px(x[i]), py(v)) : ctx.moveTo(px(x[i]), py(v))));
    ctx.stroke();
  }
}

function computeState() {
  const out = $("state_stats");
  out.classList.remove("error");
  try {
    const args = [$("process").value, num("sigma_p"), num("n_points"), num("lambda_n"), num("sigma_n"), num("eta")];
    const map = jsi_map(...args, $("mode").value === "amplitude");
    heatmap($("jsi_in"), map.input, map.n);
    heatmap($("jsi_out"), map.output, map.n);
    const hom = hom_curve(...args, num("tau_max"), 401);
    const norm = (y, b) => Array.from(y, (v) => (b > 0 ? v / b : 0));
    curves($("hom"), hom.tau_fs, [
      { y: norm(hom.input, hom.baseline_in), color: "#000" },
      { y: norm(hom.output, hom.baseline_out), color: "#c00" },
    ]);
    const wl = map.wavelengths_nm;
    const fwhm = Number.isNaN(hom.fwhm_in_fs) ? "n/a" : `${hom.fwhm_in_fs.toFixed(1)} fs`;
    out.textContent =
      `grid ${wl[wl.length - 1].toFixed(1)} to ${wl[0].toFixed(1)} nm, ${map.n} points per axis\n` +
      `visibility in  ${(100 * map.visibility_in).toFixed(2)} %   dip FWHM ${fwhm}\n` +
      `visibility out ${(100 * map.visibility_out).toFixed(2)} %\n` +
      `transmitted    ${(100 * map.transmitted).toFixed(2)} %`;
    map.free();
    hom.free();
  } catch (e) {
    out.classList.add("error");
    out.textContent = String(e.message ?? e);
  }
}

function computeBudget() {
  const out = $("budget_stats");
  out.classList.remove("error");
  try {
    const b = detection_budget(Number($("sigma_e").value), num("conc"), num("path"), Number($("r_in").value), num("fano"));
    out.innerHTML =
      `η_E      ${b.eta_e.toExponential(3)}   (η_min ${b.eta_min.toExponential(3)})\n` +
      `R_abs    ${b.r_abs.toExponential(4)} pairs/s\n` +
      `δR_det   ${b.noise_floor.toExponential(4)} pairs/s\n` +
      `σ_E,min  ${b.sigma_e_min.toExponential(3)} cm²\n` +
      `verdict  <span class="${b.detectable ? "yes" : "no"}">${b.detectable ? "detectable" : "not detectable"}</span>`;
    b.free();
  } catch (e) {
    out.classList.add("error");
    out.textContent = String(e.message ?? e);
  }
}

await init();
$("compute").addEventListener("click", computeState);
for (const id of ["sigma_e", "conc", "path", "r_in", "fano"]) $(id).addEventListener("input", computeBudget);
computeState();
computeBudget();
