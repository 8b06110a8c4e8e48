/** Round-trip against the real curation service: synthesize a dataset, start
 * the server, and drive the UI's data layer over live HTTP. */

import assert from "node:assert/strict";
import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import path from "node:path";
import test from "node:test";
import { fileURLToPath } from "node:url";

import { ApiClient } from "../src/api.js";
import { ReviewQueue } from "../src/queue.js";

const FRONTEND_DIR = path.resolve(path.dirname(fileURLToPath(import.meta.url)), "..", "..");
const PKG_DIR = path.resolve(FRONTEND_DIR, "..");

const FIXTURE_SCRIPT = `
import sys
sys.path.insert(0, sys.argv[2])
from pathlib import Path
from conftest import build_corpus_on_disk
from cosynth.corpus import load_manifest
from cosynth.paster import SynthesisConfig, run_pipeline

root = Path(sys.argv[1])
manifest = build_corpus_on_disk(root / "src", {"a": 4, "b": 4, "c": 4}, size=96, seed=5)
cfg = SynthesisConfig(seed=3, ratio_max=0.3)
report = run_pipeline(load_manifest(manifest), cfg, root / "out", min_group_size=1)
assert report.n_rejected == 0
`;

async function waitForServer(base: string, timeoutMs = 20000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${base}/api/stats`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error(`curation service at ${base} did not come up in ${timeoutMs}ms`);
}

test("UI round-trip against a live service", { timeout: 120_000 }, async (t) => {
  const work = mkdtempSync(path.join(tmpdir(), "cosynth-ui-"));
  execFileSync("python3", ["-c", FIXTURE_SCRIPT, work, path.join(PKG_DIR, "tests")], {
    stdio: "inherit",
  });

  const port = 18100 + (process.pid % 1500);
  const base = `http://127.0.0.1:${port}`;
  const server: ChildProcess = spawn(
    "cosynth",
    ["serve", "--dataset", path.join(work, "out"), "--port", String(port)],
    { stdio: "ignore" },
  );
  t.after(() => {
    server.kill("SIGTERM");
    rmSync(work, { recursive: true, force: true });
  });
  await waitForServer(base);

  const api = new ApiClient(base);
  const queue = new ReviewQueue(api, { pageSize: 8 });

  // loading the queue shows the service's pending candidates, in its order
  await queue.load();
  const direct = await api.getCandidates({ page: 0, pageSize: 8 });
  assert.equal(queue.cards.length, 8);
  assert.deepEqual(
    queue.cards.map((c) => c.candidate.sample_id),
    direct.map((c) => c.sample_id),
  );
  assert.ok(queue.cards.every((c) => c.candidate.status === "pending"));

  const statsBefore = await api.getStats();
  assert.equal(statsBefore.rejected, 0);

  // rejecting the focused card inserts a replacement with attempt = prior + 1
  const prior = queue.cards[0].candidate;
  await queue.decide("reject", "integration test");
  const replacement = queue.cards[0].candidate;
  assert.notEqual(replacement.sample_id, prior.sample_id);
  assert.equal(replacement.provenance.attempt, prior.provenance.attempt + 1);
  assert.equal(replacement.provenance.canvas_id, prior.provenance.canvas_id);

  // the decide() path already refreshed stats once; the verdict is visible
  assert.ok(queue.stats);
  assert.equal(queue.stats!.rejected, 1);
  assert.equal(queue.stats!.pending, statsBefore.pending); // one left, one joined
  assert.ok(queue.stats!.rejection_rate > 0);

  // the replacement's overlay is immediately servable
  const overlay = await fetch(api.resolve(replacement.paths.overlay));
  assert.equal(overlay.status, 200);
  assert.equal(overlay.headers.get("content-type"), "image/png");

  // accepting through the same path the keyboard uses updates server state
  await queue.decide("accept");
  const statsAfter = await api.getStats();
  assert.equal(statsAfter.accepted, 1);
  assert.equal(statsAfter.rejected, 1);
});
