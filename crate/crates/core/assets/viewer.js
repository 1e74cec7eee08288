// Minimal offline viewer for coincidence graph JSON. A richer bundle can be
// dropped in place of this file (see README, "Viewer assets").
(function () {
  "use strict";
  var NS = "http://www.w3.org/2000/svg";
  var app = document.getElementById("coinet-app");
  var graph;
  try {
    graph = JSON.parse(document.getElementById("coinet-graph").textContent);
    if (!Array.isArray(graph.nodes)) throw new Error("field `nodes` is missing");
    if (!Array.isArray(graph.edges)) throw new Error("field `edges` is missing");
  } catch (err) {
    app.innerHTML = "";
    var banner = document.createElement("div");
    banner.className = "coinet-error";
    banner.textContent = "Cannot load graph: " + err.message;
    app.appendChild(banner);
    return;
  }

  var W = 1000, H = 1000, PAD = 40;
  var nodes = graph.nodes, edges = graph.edges;
  var byId = {};
  nodes.forEach(function (n, k) {
    byId[n.id] = n;
    if (typeof n.x !== "number" || typeof n.y !== "number") {
      var t = 2 * Math.PI * k / nodes.length;
      n.x = 0.5 + 0.45 * Math.cos(t);
      n.y = 0.5 + 0.45 * Math.sin(t);
    }
  });
  var xs = nodes.map(function (n) { return n.x; });
  var ys = nodes.map(function (n) { return n.y; });
  var x0 = Math.min.apply(null, xs), x1 = Math.max.apply(null, xs);
  var y0 = Math.min.apply(null, ys), y1 = Math.max.apply(null, ys);
  var s = Math.min((W - 2 * PAD) / ((x1 - x0) || 1), (H - 2 * PAD) / ((y1 - y0) || 1));
  function px(n) { return PAD + (n.x - x0) * s; }
  function py(n) { return PAD + (n.y - y0) * s; }
  var maxF = Math.max.apply(null, nodes.map(function (n) { return n.frequency; }).concat([1]));
  var maxD = Math.max.apply(null, edges.map(function (e) { return e.d; }).concat([0]));

  var panel = document.createElement("div");
  panel.id = "coinet-panel";
  panel.innerHTML =
    "<strong>Coincidence network</strong>" +
    "<div>" + nodes.length + " nodes, " + edges.length + " edges</div>" +
    "<label>Minimum d <span id='coinet-thr-val'>0</span>" +
    "<input id='coinet-thr' type='range' min='0' step='any'></label>" +
    "<div id='coinet-hidden'></div>" +
    "<label>Search <input id='coinet-search' type='search'></label>" +
    "<div id='coinet-notice'></div>" +
    "<label><input id='coinet-size' type='checkbox' checked> Size by frequency</label>" +
    "<label><input id='coinet-labels' type='checkbox' checked> Labels</label>";
  app.appendChild(panel);
  var svg = document.createElementNS(NS, "svg");
  svg.id = "coinet-svg";
  svg.setAttribute("viewBox", "0 0 " + W + " " + H);
  app.appendChild(svg);
  var root = document.createElementNS(NS, "g");
  svg.appendChild(root);

  var edgeEls = edges.map(function (e) {
    var a = byId[e.source], b = byId[e.target];
    var l = document.createElementNS(NS, "line");
    l.setAttribute("class", "coinet-edge");
    l.setAttribute("x1", px(a)); l.setAttribute("y1", py(a));
    l.setAttribute("x2", px(b)); l.setAttribute("y2", py(b));
    l.setAttribute("stroke-width", 0.5 + 4 * (maxD > 0 ? e.d / maxD : 0));
    root.appendChild(l);
    return l;
  });
  var nodeEls = nodes.map(function (n) {
    var g = document.createElementNS(NS, "g");
    var shape;
    if (n.marker) {
      shape = document.createElementNS(NS, "path");
      shape.setAttribute("class", "coinet-marker");
    } else {
      shape = document.createElementNS(NS, "circle");
      shape.setAttribute("class", "coinet-node");
      shape.setAttribute("cx", px(n)); shape.setAttribute("cy", py(n));
    }
    var t = document.createElementNS(NS, "title");
    t.textContent = n.label + " (" + n.frequency + ")";
    shape.appendChild(t);
    var text = document.createElementNS(NS, "text");
    text.setAttribute("class", "coinet-label");
    text.setAttribute("x", px(n) + 6); text.setAttribute("y", py(n) - 6);
    text.textContent = n.label;
    g.appendChild(shape); g.appendChild(text);
    root.appendChild(g);
    return { node: n, shape: shape, text: text };
  });

  function radius(n) {
    return document.getElementById("coinet-size").checked ? 3 + 17 * Math.sqrt(n.frequency / maxF) : 6;
  }
  function drawNodes() {
    nodeEls.forEach(function (el) {
      var r = radius(el.node), x = px(el.node), y = py(el.node);
      if (el.node.marker) {
        el.shape.setAttribute("d", "M" + (x - r) + " " + (y - r) + "L" + (x + r) + " " + (y + r) +
          "M" + (x + r) + " " + (y - r) + "L" + (x - r) + " " + (y + r));
      } else {
        el.shape.setAttribute("r", r);
      }
      el.text.style.display = document.getElementById("coinet-labels").checked ? "" : "none";
    });
  }
  function applyThreshold(minD) {
    var hidden = 0;
    edges.forEach(function (e, k) {
      var show = e.d >= minD;
      edgeEls[k].style.display = show ? "" : "none";
      if (!show) hidden++;
    });
    document.getElementById("coinet-thr-val").textContent = minD.toFixed(2);
    document.getElementById("coinet-hidden").textContent = hidden + " edges hidden";
  }
  function search(q) {
    q = q.trim().toLowerCase();
    var hits = 0;
    nodeEls.forEach(function (el) {
      var hit = q !== "" && el.node.label.toLowerCase().indexOf(q) >= 0;
      if (hit) hits++;
      if (!el.node.marker) el.shape.setAttribute("class", hit ? "coinet-node coinet-hit" : "coinet-node");
    });
    document.getElementById("coinet-notice").textContent = q !== "" && hits === 0 ? "no results" : (q ? hits + " match(es)" : "");
  }

  var thr = document.getElementById("coinet-thr");
  thr.max = maxD; thr.value = 0;
  thr.addEventListener("input", function () { applyThreshold(parseFloat(thr.value)); });
  document.getElementById("coinet-search").addEventListener("input", function (ev) { search(ev.target.value); });
  document.getElementById("coinet-size").addEventListener("change", drawNodes);
  document.getElementById("coinet-labels").addEventListener("change", drawNodes);

  var zoom = 1, tx = 0, ty = 0, drag = null;
  function transform() { root.setAttribute("transform", "translate(" + tx + "," + ty + ") scale(" + zoom + ")"); }
  svg.addEventListener("wheel", function (ev) {
    ev.preventDefault();
    zoom *= ev.deltaY < 0 ? 1.1 : 1 / 1.1;
    transform();
  });
  svg.addEventListener("mousedown", function (ev) { drag = [ev.clientX - tx, ev.clientY - ty]; });
  window.addEventListener("mouseup", function () { drag = null; });
  window.addEventListener("mousemove", function (ev) {
    if (drag) { tx = ev.clientX - drag[0]; ty = ev.clientY - drag[1]; transform(); }
  });

  drawNodes();
  applyThreshold(0);
})();
