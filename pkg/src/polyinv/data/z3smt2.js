// Reads one SMT-LIB 2 script on stdin, evaluates it with the Z3
// WebAssembly build (npm package "z3-solver"), and writes the solver's
// reply to stdout. Exit codes: 0 reply produced, 1 evaluation error,
// 2 z3-solver module missing.
'use strict';

const path = require('path');

function resolveZ3() {
  const candidates = ['z3-solver'];
  if (process.env.POLYINV_NODE_MODULES) {
    candidates.push(path.join(process.env.POLYINV_NODE_MODULES, 'z3-solver'));
  }
  candidates.push(path.join(process.cwd(), 'node_modules', 'z3-solver'));
  // editable installs keep this file under <repo>/src/polyinv/data
  candidates.push(path.resolve(__dirname, '..', '..', '..', 'node_modules', 'z3-solver'));
  for (const candidate of candidates) {
    try {
      return require(candidate);
    } catch (err) {
      if (err.code !== 'MODULE_NOT_FOUND') throw err;
    }
  }
  process.stderr.write(
    'z3-solver node module not found; run "npm install" in the repository ' +
    'root or point POLYINV_NODE_MODULES at a node_modules directory\n');
  process.exit(2);
}

async function main() {
  const { init } = resolveZ3();
  const { Z3 } = await init();
  const cfg = Z3.mk_config();
  const ctx = Z3.mk_context(cfg);
  const chunks = [];
  process.stdin.on('data', (d) => chunks.push(d));
  process.stdin.on('end', async () => {
    try {
      const reply = await Z3.eval_smtlib2_string(ctx, chunks.join(''));
      process.stdout.write(reply.endsWith('\n') ? reply : reply + '\n');
      process.exit(0);
    } catch (err) {
      process.stderr.write(String(err) + '\n');
      process.exit(1);
    }
  });
}

main();
