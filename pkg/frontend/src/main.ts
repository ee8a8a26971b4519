import { ApiClient } from "./api.js";
import { EvalApp } from "./app.js";

const root = document.querySelector<HTMLElement>("#app");
if (!root) throw new Error("missing #app mount point");
new EvalApp(new ApiClient()).mount(root);
