const el = document.querySelector(arguments[0]);
if (!el) return false;
el.click();
return true;
