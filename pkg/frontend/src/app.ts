// Browser bootstrap: wires the session state machine and players into
// the page. Configuration comes from query parameters:
//   ?service=http://host:port&study=STUDY_ID&subject=NAME

import { StudyApi } from "./api.js";
import { MediaLike, PairedPlayers, ReferenceOverlay } from "./players.js";
import { UiSession, UiSnapshot } from "./session.js";

const VIDEO_EXTENSIONS = [".mp4", ".webm"];

function isVideo(url: string): boolean {
  const clean = url.split("?")[0].toLowerCase();
  return VIDEO_EXTENSIONS.some((ext) => clean.endsWith(ext));
}

/** Adapt a video or image element to the player-facing media interface. */
export function domMedia(element: HTMLVideoElement | HTMLImageElement): MediaLike {
  if (element instanceof HTMLVideoElement) {
    return {
      restart() {
        element.currentTime = 0;
        void element.play();
      },
      ready() {
        return new Promise<void>((resolve, reject) => {
          if (element.readyState >= 4) return resolve();
          element.addEventListener("canplaythrough", () => resolve(), { once: true });
          element.addEventListener("error", () => reject(new Error("video failed")), { once: true });
        });
      },
    };
  }
  return {
    restart() {
      // still image: nothing to restart
    },
    ready() {
      return new Promise<void>((resolve, reject) => {
        if (element.complete && element.naturalWidth > 0) return resolve();
        element.addEventListener("load", () => resolve(), { once: true });
        element.addEventListener("error", () => reject(new Error("image failed")), { once: true });
      });
    },
  };
}

function mediaElement(url: string): HTMLVideoElement | HTMLImageElement {
  if (isVideo(url)) {
    const video = document.createElement("video");
    video.src = url;
    video.muted = true;
    video.loop = false;
    video.playsInline = true;
    return video;
  }
  const image = document.createElement("img");
  image.src = url;
  return image;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className: string,
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  node.className = className;
  if (text) node.textContent = text;
  return node;
}

export async function startApp(root: HTMLElement): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const service = params.get("service") ?? "";
  const studyId = params.get("study") ?? "";
  const subject = params.get("subject") ?? "";
  if (!studyId) {
    root.textContent = "Missing ?study= parameter.";
    return;
  }

  const api = new StudyApi(service);
  const session = await UiSession.open(api, studyId, subject);

  let players: PairedPlayers | null = null;
  let overlay: ReferenceOverlay | null = null;
  let renderedToken: number | null = null;

  const render = (snap: UiSnapshot) => {
    if (snap.phase === "complete") {
      renderPairArea(snap);
      return;
    }
    if (snap.pair && snap.pair.token !== renderedToken) {
      renderedToken = snap.pair.token;
      renderPairArea(snap);
      return;
    }
    updateControls(snap);
  };

  const renderPairArea = (snap: UiSnapshot) => {
    root.textContent = "";
    if (snap.phase === "complete" || !snap.pair) {
      const done = el("div", "completion");
      done.appendChild(el("h2", "", "Thank you!"));
      done.appendChild(
        el("p", "", `You made ${snap.completedChoices} comparisons.`),
      );
      root.appendChild(done);
      return;
    }

    const pair = snap.pair;
    const stage = el("div", "stage");
    const sides: HTMLElement[] = [];
    for (const stim of [pair.a, pair.b]) {
      const side = el("div", "side");
      const media = mediaElement(api.mediaUrl(stim.media_url));
      media.classList.add("stimulus");
      const button = el("button", "choose", "This one is closer to the original");
      button.disabled = true;
      button.addEventListener("click", () => void session.choose(stim.id));
      side.appendChild(media);
      side.appendChild(button);
      stage.appendChild(side);
      sides.push(side);
    }
    root.appendChild(stage);

    const controls = el("div", "controls");
    const replayButton = el("button", "replay", "Replay both");
    replayButton.addEventListener("click", () => players?.replay());
    const referenceButton = el("button", "reference", "See original model");
    referenceButton.addEventListener("click", () => void overlay?.open());
    const status = el("span", "status", "loading media...");
    controls.appendChild(replayButton);
    controls.appendChild(referenceButton);
    controls.appendChild(status);
    root.appendChild(controls);

    const overlayHost = el("div", "overlay hidden");
    const overlayInner = el("div", "overlay-inner");
    if (snap.referenceUrl) {
      const refMedia = mediaElement(api.mediaUrl(snap.referenceUrl));
      refMedia.classList.add("reference-media");
      overlayInner.appendChild(refMedia);
      const close = el("button", "close", "Back to the comparison");
      close.addEventListener("click", () => overlay?.dismiss());
      overlayInner.appendChild(close);
      overlayHost.appendChild(overlayInner);
      root.appendChild(overlayHost);
      overlay = new ReferenceOverlay(
        domMedia(refMedia),
        () => overlayHost.classList.remove("hidden"),
        () => overlayHost.classList.add("hidden"),
      );
    }

    const [leftMedia, rightMedia] = Array.from(
      stage.querySelectorAll<HTMLVideoElement | HTMLImageElement>(".stimulus"),
    );
    players = new PairedPlayers(domMedia(leftMedia), domMedia(rightMedia));
    void players.start().then((outcome) => {
      if (outcome === "loaded") session.mediaLoaded();
      else {
        session.mediaFailed();
        const retry = el("button", "retry", "Retry loading");
        retry.addEventListener("click", () => renderPairArea(session.snapshot()));
        root.appendChild(retry);
      }
    });
  };

  const updateControls = (snap: UiSnapshot) => {
    const buttons = root.querySelectorAll<HTMLButtonElement>("button.choose");
    for (const button of buttons) button.disabled = !session.canChoose;
    const status = root.querySelector(".status");
    if (status) {
      if (snap.phase === "media-error") status.textContent = "media failed to load";
      else if (snap.phase === "submitting") status.textContent = "submitting...";
      else if (snap.phase === "loading-media") status.textContent = "loading media...";
      else if (snap.minRemaining !== null) {
        status.textContent =
          `${snap.completedChoices} done, ` +
          `${snap.minRemaining}-${snap.maxRemaining} comparisons left`;
      } else status.textContent = "";
    }
  };

  window.addEventListener("keydown", (event) => {
    const pair = session.snapshot().pair;
    if (!pair || !session.canChoose) return;
    if (event.key === "ArrowLeft") void session.choose(pair.a.id);
    if (event.key === "ArrowRight") void session.choose(pair.b.id);
  });

  session.onChange(render);
  render(session.snapshot());
}

declare global {
  interface Window {
    texmeshqaStart?: typeof startApp;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  window.texmeshqaStart = startApp;
  const root = document.getElementById("app");
  if (root) {
    void startApp(root);
  }
}
