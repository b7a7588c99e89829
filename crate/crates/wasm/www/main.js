import init, { optimal_design, curvature_summary, road_next } from "./pkg/oadlab_wasm.js";

const $ = (id) => document.getElementById(id);

function show(out, f) {
  out.classList.remove("err");
  try {
    out.textContent = JSON.stringify(JSON.parse(f()), null, 2);
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e);
  }
}

await init();

$("d-run").onclick = () =>
  show($("d-out"), () => optimal_design($("d-model").value, $("d-crit").value));

$("c-run").onclick = () =>
  show($("c-out"), () =>
    curvature_summary($("c-model").value, $("c-crit").value, $("c-err").value, Number($("c-n").value)));

$("s-run").onclick = () => show($("s-out"), () => road_next($("s-in").value));
