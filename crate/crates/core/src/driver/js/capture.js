const ROLES = new Set(['button', 'link', 'checkbox', 'radio', 'switch', 'tab', 'menuitem',
  'menuitemcheckbox', 'menuitemradio', 'option', 'combobox', 'textbox', 'searchbox',
  'slider', 'spinbutton', 'treeitem']);
const KEEP = new Set(['id', 'name', 'type', 'role', 'href', 'title', 'placeholder', 'value',
  'target', 'contenteditable', 'routerlink', 'formaction']);
const nodes = document.querySelectorAll(
  'a, button, input, select, textarea, summary, [role], [contenteditable]');
const candidates = [];
for (const el of nodes) {
  const tag = el.tagName.toLowerCase();
  const role = el.getAttribute('role');
  if (tag === 'input' && (el.getAttribute('type') || '').toLowerCase() === 'hidden') continue;
  if (!['a', 'button', 'input', 'select', 'textarea', 'summary'].includes(tag)
      && !(role && ROLES.has(role)) && !el.isContentEditable) continue;
  if (!__sv.visible(el)) continue;
  const r = el.getBoundingClientRect();
  const attributes = {};
  for (const a of Array.from(el.attributes)) {
    if (KEEP.has(a.name) || a.name.startsWith('aria-') || a.name.startsWith('data-')) {
      attributes[a.name] = a.value;
    }
  }
  candidates.push({
    locator: __sv.cssPath(el),
    tag_or_role: role ? tag + '[role=' + role + ']' : tag,
    box: { x: r.left + window.scrollX, y: r.top + window.scrollY, width: r.width, height: r.height },
    text: __sv.squash(el.innerText || el.value || '').slice(0, 200),
    attributes,
    visible: true,
  });
}
const links = Array.from(document.querySelectorAll('a[href]')).map((a) => a.href);
const headings = Array.from(document.querySelectorAll('h1, h2, h3'))
  .filter((h) => __sv.visible(h))
  .map((h) => __sv.squash(h.innerText));
return {
  url: location.href,
  viewport: { width: window.innerWidth, height: window.innerHeight },
  candidates,
  internal_links: links,
  headings,
  body_digest: __sv.squash(document.body ? document.body.innerText : ''),
};
