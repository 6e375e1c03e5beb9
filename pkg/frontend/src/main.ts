import { ConsoleApi } from "./api.js";
import { App } from "./app.js";

// ?api=http://host:port overrides; default assumes the page is served
// from the same origin as the service (or behind a reverse proxy).
const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? `${window.location.protocol}//${window.location.host}`;

new App(new ConsoleApi(baseUrl)).mount(document.getElementById("app") as HTMLElement);
