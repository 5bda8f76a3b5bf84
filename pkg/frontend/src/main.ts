import { Console } from "./console.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "";
new Console(base);
