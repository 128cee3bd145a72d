// arguments[0]: locator; arguments[1]: value to insert.
const el = document.querySelector(arguments[0]);
if (!el) return { found: false };
if (el.focus) el.focus();
if (el.disabled || el.readOnly) return { found: true, inserted: false };
if (el.tagName === 'SELECT') {
  if (el.options.length > 1) el.selectedIndex = (el.selectedIndex + 1) % el.options.length;
} else if (el.tagName === 'INPUT' || el.tagName === 'TEXTAREA') {
  const proto = el.tagName === 'TEXTAREA' ? HTMLTextAreaElement.prototype : HTMLInputElement.prototype;
  Object.getOwnPropertyDescriptor(proto, 'value').set.call(el, arguments[1]);
} else if (el.isContentEditable) {
  el.textContent = arguments[1];
} else {
  return { found: true, inserted: false };
}
el.dispatchEvent(new Event('input', { bubbles: true }));
el.dispatchEvent(new Event('change', { bubbles: true }));
return { found: true, inserted: true };
