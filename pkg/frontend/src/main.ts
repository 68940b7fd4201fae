import { ApiClient } from "./api";
import { ModelsView } from "./models";
import { OverviewView } from "./overview";

const client = new ApiClient("/api");

const views = {
  overview: new OverviewView(client),
  models: new ModelsView(client),
};

function boot(): void {
  const tabs = document.getElementById("tabs");
  const root = document.getElementById("view");
  const banner = document.getElementById("banner");
  if (!tabs || !root || !banner) throw new Error("missing page skeleton");

  const show = (name: keyof typeof views) => {
    for (const btn of tabs.querySelectorAll("button")) {
      btn.classList.toggle("current", btn.dataset.view === name);
    }
    views[name].mount(root).catch((err) => {
      root.replaceChildren();
      const msg = document.createElement("p");
      msg.className = "bad";
      msg.textContent = String(err);
      root.append(msg);
    });
  };

  for (const name of Object.keys(views) as (keyof typeof views)[]) {
    const btn = document.createElement("button");
    btn.dataset.view = name;
    btn.textContent = name === "overview" ? "Overview" : "Model Management";
    btn.addEventListener("click", () => show(name));
    tabs.append(btn);
  }

  client.health().then(
    (info) => {
      banner.textContent = `backend ok, server time ${info.time}`;
    },
    (err) => {
      banner.textContent = `backend unreachable: ${err}`;
      banner.classList.add("bad");
    },
  );

  show("overview");
}

boot();
