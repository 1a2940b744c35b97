/** End-to-end checks against a real service instance on the chair fixture:
 * driving a variation slider to 1 must display exactly the mesh the service
 * returns for that state, and unchecking a part group must remove exactly
 * that group's triangle ranges while leaving every other range untouched.
 */

import { ChildProcess, execFileSync, spawn } from 'node:child_process';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { Api, EvalResponse, MeshPayload, MeshRange, SpaceInfo } from '../src/api.js';
import { SpaceController } from '../src/controller.js';

const PORT = 7899;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;
let api: Api;
let space: SpaceInfo;

async function waitForService(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const res = await fetch(`${BASE}/space`);
      if (res.ok) return;
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) throw new Error(`service not reachable at ${BASE}`);
    await new Promise((r) => setTimeout(r, 250));
  }
}

beforeAll(async () => {
  const reparam = execFileSync(
    'python3',
    ['-c', "from reparam import fixtures; print(fixtures.fixture_path('chair.reparam'))"],
    { encoding: 'utf8' },
  ).trim();
  server = spawn(
    'python3',
    ['-m', 'reparam.cli', 'serve', '--reparam', reparam, '--port', String(PORT)],
    { stdio: 'ignore' },
  );
  await waitForService(60_000);
  api = new Api(BASE);
  space = await api.space();
}, 90_000);

afterAll(() => {
  server?.kill();
});

/** Controller wired to the live service, capturing the last displayed frame. */
function harness(): { controller: SpaceController; shown: () => EvalResponse } {
  let last: EvalResponse | undefined;
  const controller = new SpaceController(api, space, {
    onMesh: (response) => {
      last = response;
    },
  });
  return {
    controller,
    shown: () => {
      if (!last) throw new Error('nothing rendered');
      return last;
    },
  };
}

function triangles(mesh: MeshPayload, range: MeshRange): number[][][] {
  const out: number[][][] = [];
  for (let i = 0; i < range.face_count; i++) {
    const face = mesh.faces[range.face_start + i];
    out.push(face.map((vi) => mesh.vertices[vi]));
  }
  return out;
}

describe('slider extremes against the live service', () => {
  it(
    'weight 1 on each variation displays the exact service response',
    async () => {
      expect(space.variations.length).toBeGreaterThan(0);
      const base = await api.baseMesh();
      for (const label of space.variations) {
        const { controller, shown } = harness();
        controller.setWeight(label, 1.0);
        await controller.flush();
        const direct = await api.evaluate({
          weights: { [label]: 1.0 },
          offsets: [],
          toggles: {},
        });
        expect(direct.x).not.toStrictEqual(base.x); // the slider really moves the model
        expect(shown()).toStrictEqual(direct);
      }
    },
    120_000,
  );

  it(
    'unchecking a group removes exactly its ranges and nothing else',
    async () => {
      const base = await api.baseMesh();
      expect(space.groups.length).toBeGreaterThan(0);
      for (const group of space.groups) {
        const { controller, shown } = harness();
        controller.setToggle(group.name, false);
        await controller.flush();
        const toggled = shown();

        // hiding parts must not move the model
        expect(toggled.x).toStrictEqual(base.x);

        const keptNames = base.mesh.ranges
          .map((r) => r.name)
          .filter((n) => !group.members.includes(n));
        expect(toggled.mesh.ranges.map((r) => r.name)).toStrictEqual(keptNames);

        for (const tr of toggled.mesh.ranges) {
          const br = base.mesh.ranges.find((r) => r.name === tr.name)!;
          expect(tr.vertex_count).toBe(br.vertex_count);
          expect(tr.face_count).toBe(br.face_count);
          expect(triangles(toggled.mesh, tr)).toStrictEqual(triangles(base.mesh, br));
        }
      }
    },
    120_000,
  );
});
