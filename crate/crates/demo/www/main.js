import init, { toneSpectrogram, curationSweep, trainAndRoc } from "./pkg/vnd_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function guard(outId, fn) {
  return () => {
    const out = $(outId);
    out.classList.remove("err");
    try {
      fn(out);
    } catch (e) {
      out.classList.add("err");
      out.textContent = String(e.message ?? e);
    }
  };
}

function drawSpectrogram(s) {
  const cv = $("tone-canvas");
  const ctx = cv.getContext("2d");
  ctx.clearRect(0, 0, cv.width, cv.height);
  let lo = Infinity, hi = -Infinity;
  for (const v of s.log_mel) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  const w = cv.width / s.frames, h = cv.height / s.n_mels;
  for (let f = 0; f < s.frames; f++) {
    for (let m = 0; m < s.n_mels; m++) {
      const t = hi > lo ? (s.log_mel[f * s.n_mels + m] - lo) / (hi - lo) : 0;
      ctx.fillStyle = `hsl(${240 - 240 * t}, 80%, ${15 + 45 * t}%)`;
      // low bands at the bottom
      ctx.fillRect(f * w, cv.height - (m + 1) * h, Math.ceil(w), Math.ceil(h));
    }
  }
}

$("tone-go").onclick = guard("tone-out", (out) => {
  const s = JSON.parse(toneSpectrogram(num("tone-f"), num("tone-g"), 0.5, num("tone-m")));
  drawSpectrogram(s);
  out.textContent = `${s.frames} frames × ${s.n_mels} bands; loudest band ${s.peak_band} ` +
    `(centre ${s.centres_hz[s.peak_band].toFixed(1)} Hz)`;
});

$("sweep-go").onclick = guard("sweep-out", (out) => {
  const r = JSON.parse(curationSweep(num("sweep-n"), num("sweep-noise"), num("sweep-seed")));
  const rows = r.rows.map((x) =>
    `<tr><td>${x.c.toFixed(1)}</td><td>${x.positives}</td>` +
    `<td>${x.precision.toFixed(3)}</td><td>${x.recall.toFixed(3)}</td></tr>`).join("");
  out.innerHTML = `${r.clips} clips, ${r.visual} truly visual; keeping every keystep clip gives precision ` +
    `${r.vr_precision.toFixed(3)}.<table><tr><th>c</th><th>positives</th><th>precision</th><th>recall</th></tr>` +
    `${rows}</table>`;
});

function drawRoc(curves) {
  const cv = $("roc-canvas");
  const ctx = cv.getContext("2d");
  const pad = 30, size = cv.width - 2 * pad;
  const X = (x) => pad + x * size, Y = (y) => cv.height - pad - y * size;
  ctx.clearRect(0, 0, cv.width, cv.height);
  ctx.strokeStyle = "#bbb";
  ctx.strokeRect(pad, pad, size, size);
  ctx.setLineDash([4, 4]);
  ctx.beginPath(); ctx.moveTo(X(0), Y(0)); ctx.lineTo(X(1), Y(1)); ctx.stroke();
  ctx.setLineDash([]);
  ctx.fillStyle = "#444";
  ctx.fillText("false positive rate", pad + size / 2 - 40, cv.height - 8);
  ctx.save(); ctx.translate(12, pad + size / 2 + 40); ctx.rotate(-Math.PI / 2);
  ctx.fillText("true positive rate", 0, 0); ctx.restore();
  curves.forEach(([c, color, name], i) => {
    ctx.strokeStyle = color; ctx.lineWidth = 2;
    ctx.beginPath();
    c.points.forEach(([x, y], k) => (k ? ctx.lineTo(X(x), Y(y)) : ctx.moveTo(X(x), Y(y))));
    ctx.stroke();
    ctx.fillStyle = color;
    ctx.fillText(`${name}  AUC ${c.auc.toFixed(3)}`, X(0.45), Y(0.12 - 0.07 * i));
  });
}

$("roc-go").onclick = guard("roc-out", (out) => {
  const t0 = performance.now();
  const r = JSON.parse(trainAndRoc(num("roc-c"), num("roc-epochs"), num("roc-noise"), num("roc-seed")));
  drawRoc([[r.model, "#1565c0", "dual encoder"], [r.objects, "#e65100", "object overlap"]]);
  const loss = r.final_loss === null ? "n/a" : r.final_loss.toFixed(4);
  out.textContent = `${r.train_positives} curated positives among ${r.train_clips} training clips; ` +
    `final loss ${loss}; scored ${r.test_clips} held-out clips in ${(performance.now() - t0).toFixed(0)} ms`;
});

await init();
$("tone-go").click();
$("sweep-go").click();
