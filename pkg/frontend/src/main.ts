import { createApp } from "./app.js";

const root = document.getElementById("app");
if (root) {
  createApp(root, "");
}
