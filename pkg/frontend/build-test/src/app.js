/** Gallery UI over the review queue: keyboard-first accept/reject with the
 * same code path as the buttons, so both produce identical server logs. */
import { ApiClient } from "./api.js";
import { ReviewQueue } from "./queue.js";
const api = new ApiClient("");
const queue = new ReviewQueue(api, { pageSize: 12 });
const el = {
    banner: document.getElementById("banner"),
    stats: document.getElementById("stats"),
    gallery: document.getElementById("gallery"),
    groupSelect: document.getElementById("group-select"),
    prev: document.getElementById("prev-page"),
    next: document.getElementById("next-page"),
    pageLabel: document.getElementById("page-label"),
    toast: document.getElementById("toast"),
};
let toastTimer = null;
function showToast(message) {
    el.toast.textContent = message;
    el.toast.classList.add("visible");
    if (toastTimer)
        clearTimeout(toastTimer);
    toastTimer = setTimeout(() => el.toast.classList.remove("visible"), 4000);
}
function renderBanner() {
    if (queue.offlineError) {
        el.banner.innerHTML = "";
        el.banner.append(`service error: ${queue.offlineError} `);
        const retry = document.createElement("button");
        retry.textContent = "retry";
        retry.onclick = () => void reload();
        el.banner.appendChild(retry);
        el.banner.classList.add("visible");
    }
    else {
        el.banner.classList.remove("visible");
    }
}
function renderStats() {
    const s = queue.stats;
    if (!s) {
        el.stats.textContent = "";
        return;
    }
    const rate = (s.rejection_rate * 100).toFixed(1);
    el.stats.textContent =
        `pending ${s.pending} · accepted ${s.accepted} · rejected ${s.rejected} ` +
            `· rejection rate ${rate}%`;
}
function provenanceLine(card) {
    const p = card.candidate.provenance;
    const occ = card.candidate.occlusion_ratio ?? 0;
    const scale = p.scale == null ? "?" : p.scale.toFixed(2);
    return (`${p.source_group} → ${p.canvas_id} · scale ${scale}` +
        `${p.flip ? " · flipped" : ""} · occ ${(occ * 100).toFixed(1)}% · attempt ${p.attempt}`);
}
function renderCard(card, index) {
    const root = document.createElement("article");
    root.className = "card";
    if (index === queue.focus)
        root.classList.add("focused");
    if (card.phase === "submitting")
        root.classList.add("submitting");
    root.onclick = () => {
        queue.focus = index;
        render();
    };
    const overlay = document.createElement("img");
    overlay.src = api.resolve(card.candidate.paths.overlay);
    overlay.alt = `overlay for ${card.candidate.sample_id}`;
    overlay.loading = "lazy";
    root.appendChild(overlay);
    const title = document.createElement("h3");
    title.textContent = `${card.candidate.sample_id} (${card.candidate.group})`;
    root.appendChild(title);
    const prov = document.createElement("p");
    prov.className = "provenance";
    prov.textContent = provenanceLine(card);
    root.appendChild(prov);
    if (card.relabeledTo) {
        const note = document.createElement("p");
        note.className = "relabel-note";
        note.textContent = `relabel → ${card.relabeledTo}`;
        root.appendChild(note);
    }
    if (card.error) {
        const err = document.createElement("p");
        err.className = "card-error";
        err.textContent = card.error;
        root.appendChild(err);
    }
    const actions = document.createElement("div");
    actions.className = "actions";
    const accept = document.createElement("button");
    accept.textContent = "accept (A)";
    accept.className = "accept";
    accept.disabled = card.phase !== "pending";
    accept.onclick = (ev) => {
        ev.stopPropagation();
        queue.focus = index;
        void queue.decide("accept");
    };
    const reject = document.createElement("button");
    reject.textContent = "reject (R)";
    reject.className = "reject";
    reject.disabled = card.phase !== "pending";
    reject.onclick = (ev) => {
        ev.stopPropagation();
        queue.focus = index;
        void queue.decide("reject");
    };
    const relabel = document.createElement("button");
    relabel.textContent = "relabel…";
    relabel.disabled = card.phase !== "pending";
    relabel.onclick = (ev) => {
        ev.stopPropagation();
        queue.focus = index;
        const newLabel = window.prompt("Corrected label for this canvas:");
        if (newLabel)
            void queue.decide("relabel", undefined, newLabel);
    };
    actions.append(accept, reject, relabel);
    root.appendChild(actions);
    return root;
}
function render() {
    renderBanner();
    renderStats();
    el.pageLabel.textContent = `page ${queue.page + 1}`;
    el.prev.disabled = queue.page === 0;
    el.next.disabled = queue.cards.length < queue.pageSize;
    el.gallery.innerHTML = "";
    if (queue.allReviewed) {
        const done = document.createElement("div");
        done.className = "all-reviewed";
        const s = queue.stats;
        done.textContent = s
            ? `All reviewed — accepted ${s.accepted}, rejected ${s.rejected}, ` +
                `rejection rate ${(s.rejection_rate * 100).toFixed(1)}%`
            : "All reviewed";
        el.gallery.appendChild(done);
        return;
    }
    queue.cards.forEach((card, index) => el.gallery.appendChild(renderCard(card, index)));
}
async function loadGroups() {
    try {
        const groups = await api.getGroups();
        el.groupSelect.innerHTML = "";
        const all = document.createElement("option");
        all.value = "";
        all.textContent = "all groups";
        el.groupSelect.appendChild(all);
        groups.forEach((g) => {
            const opt = document.createElement("option");
            opt.value = g.label;
            opt.textContent = `${g.label} (${g.pending} pending)`;
            el.groupSelect.appendChild(opt);
        });
    }
    catch {
        // the banner from the queue load covers reachability problems
    }
}
async function reload() {
    try {
        await queue.load(el.groupSelect.value || undefined, queue.page);
    }
    catch {
        // banner already rendered via the error event
    }
    await queue.refreshStats();
    render();
}
function bindEvents() {
    queue.onChange((event) => {
        if (event.kind === "error" && event.message)
            showToast(event.message);
        render();
    });
    el.groupSelect.onchange = () => {
        queue.page = 0;
        void reload();
    };
    el.prev.onclick = () => {
        if (queue.page > 0) {
            queue.page -= 1;
            void reload();
        }
    };
    el.next.onclick = () => {
        queue.page += 1;
        void reload();
    };
    document.addEventListener("keydown", (ev) => {
        if (ev.target instanceof HTMLInputElement || ev.target instanceof HTMLSelectElement)
            return;
        switch (ev.key) {
            case "a":
            case "A":
                void queue.decide("accept");
                break;
            case "r":
            case "R":
                void queue.decide("reject");
                break;
            case "ArrowRight":
            case "ArrowDown":
                queue.focusNext();
                break;
            case "ArrowLeft":
            case "ArrowUp":
                queue.focusPrev();
                break;
        }
    });
}
async function start() {
    bindEvents();
    await loadGroups();
    await reload();
}
void start();
