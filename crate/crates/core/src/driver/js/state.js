// arguments[0]: locator; arguments[1]: true to (re)arm the event recorder.
const el = document.querySelector(arguments[0]);
if (el && arguments[1]) {
  window.__svTarget = el;
  window.__svEvents = [];
  if (!window.__svArmed) {
    window.__svArmed = true;
    for (const type of ['input', 'change']) {
      window.addEventListener(type, (e) => {
        if (e.target === window.__svTarget) window.__svEvents.push(type);
      }, true);
    }
  }
}
return {
  url: location.href,
  found: !!el,
  attrs: el ? __sv.stateAttrs(el) : {},
  value: el ? ('value' in el ? String(el.value) : el.textContent) : null,
  href: el ? (el.getAttribute('href') || el.getAttribute('data-href') || null) : null,
  overlays: __sv.overlays(),
  events: window.__svEvents || [],
  text: __sv.squash(document.body ? document.body.innerText : ''),
};
