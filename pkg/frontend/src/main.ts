import { mount } from "./app.js";

mount("app", "http://127.0.0.1:8571");
