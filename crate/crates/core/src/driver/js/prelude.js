// Shared helpers; concatenated in front of each command script.
const __sv = {
  visible(el) {
    for (let n = el; n && n.nodeType === 1; n = n.parentElement) {
      const s = getComputedStyle(n);
      if (s.display === 'none' || s.visibility === 'hidden' || s.visibility === 'collapse') return false;
      if (parseFloat(s.opacity) === 0) return false;
    }
    const r = el.getBoundingClientRect();
    return r.width > 0 && r.height > 0;
  },
  unique(sel) {
    try { return document.querySelectorAll(sel).length === 1; } catch (e) { return false; }
  },
  // Shortest unique CSS path, built from the element upward.
  cssPath(el) {
    if (el.id && __sv.unique('#' + CSS.escape(el.id))) return '#' + CSS.escape(el.id);
    const parts = [];
    let node = el;
    while (node && node.nodeType === 1) {
      if (node !== el && node.id && __sv.unique('#' + CSS.escape(node.id))) {
        parts.unshift('#' + CSS.escape(node.id));
      } else {
        let part = node.tagName.toLowerCase();
        const parent = node.parentElement;
        if (parent) {
          const same = Array.from(parent.children).filter((c) => c.tagName === node.tagName);
          if (same.length > 1) part += ':nth-of-type(' + (same.indexOf(node) + 1) + ')';
        }
        parts.unshift(part);
      }
      const sel = parts.join(' > ');
      if (__sv.unique(sel)) return sel;
      node = node.parentElement;
    }
    return parts.join(' > ');
  },
  squash(text) {
    return (text || '').replace(/\s+/g, ' ').trim();
  },
  stateAttrs(el) {
    const out = {};
    for (const a of Array.from(el.attributes)) {
      if (a.name.startsWith('aria-') || a.name === 'class' || a.name === 'data-state' || a.name === 'open') {
        out[a.name] = a.value;
      }
    }
    if ('checked' in el) out['checked'] = String(!!el.checked);
    if ('selected' in el) out['selected'] = String(!!el.selected);
    if (el.tagName === 'DETAILS' || el.tagName === 'DIALOG') out['open'] = String(!!el.open);
    return out;
  },
  overlays() {
    const out = [];
    const vw = window.innerWidth;
    const vh = window.innerHeight;
    document.querySelectorAll('[role=dialog],[role=alertdialog],dialog[open],[aria-modal=true]').forEach((e) => {
      if (__sv.visible(e)) out.push('dialog:' + __sv.cssPath(e));
    });
    document.querySelectorAll('[aria-expanded=true]').forEach((e) => out.push('expanded:' + __sv.cssPath(e)));
    for (const e of document.body.querySelectorAll('*')) {
      if (getComputedStyle(e).position !== 'fixed' || !__sv.visible(e)) continue;
      const r = e.getBoundingClientRect();
      const w = Math.max(0, Math.min(r.right, vw) - Math.max(r.left, 0));
      const h = Math.max(0, Math.min(r.bottom, vh) - Math.max(r.top, 0));
      if (w * h >= 0.25 * vw * vh) out.push('fixed:' + __sv.cssPath(e));
    }
    return out;
  },
};
