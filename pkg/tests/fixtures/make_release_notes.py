"""Regenerate the synthetic release-notes corpus under ``release_notes/``.

The texts are written for testing only; they mimic the shape of SDK release
notes (prelude, new features, upgrade notes, deprecations) but are not
copies of any published document. Output is deterministic.

    python tests/fixtures/make_release_notes.py
"""

from __future__ import annotations

import random
from pathlib import Path

HERE = Path(__file__).parent
OUT = HERE / "release_notes"

VERSIONS = [
    ("0.39.0", "minor", 9),
    ("0.40.0", "minor", 14),
    ("0.41.0", "minor", 22),
    ("0.42.0", "minor", 17),
    ("0.43.0", "minor", 31),
    ("0.44.0", "minor", 26),
    ("0.45.0", "minor", 58),
    ("0.46.0", "minor", 40),
    ("1.0.0", "major", 95),
    ("1.1.0", "minor", 44),
    ("1.2.0", "minor", 37),
    ("1.3.0", "minor", 52),
    ("1.4.0", "minor", 29),
]

HIGHLIGHTS = {
    "0.46.0": """\
Deprecation Notes
-----------------

- The qiskit.extensions module is deprecated. The gate classes it exposed,
  such as UnitaryGate and Initialize, are available from
  qiskit.circuit.library and the module will be removed in 1.0.

- The execute() function is deprecated. Call transpile() on the circuits and
  then run them with backend.run() instead.

- The qiskit.tools module is deprecated, including the job_monitor helper and
  the Jupyter magics in qiskit.tools.jupyter.

- The BasicAer provider is deprecated in favour of the new BasicProvider,
  which exposes the BasicSimulator backend.

- QuantumCircuit.qasm() is deprecated. Use qiskit.qasm2.dumps() to export a
  circuit to OpenQASM 2.

- The discrete pulse functions in qiskit.pulse.library.discrete are
  deprecated; build the equivalent symbolic pulses instead.
""",
    "1.0.0": """\
Prelude
-------

Qiskit 1.0 is the first major release. Deprecated APIs from the 0.x series
have been removed.

Upgrade Notes
-------------

- The execute() function has been removed. Use transpile() followed by
  backend.run().

- The qiskit.extensions module has been removed. Import UnitaryGate and the
  other gates from qiskit.circuit.library.

- The BasicAer provider has been removed. Use BasicProvider and
  BasicSimulator from qiskit.providers.basic_provider.

- QuantumCircuit.bind_parameters() has been removed. Use
  QuantumCircuit.assign_parameters() instead.

- The qiskit.opflow module has been removed. Operators are expressed with
  SparsePauliOp from qiskit.quantum_info.

- The index and register attributes of Qubit and Clbit have been removed.
  Use QuantumCircuit.find_bit() to locate a bit.

New Features
------------

- New primitive interfaces EstimatorV2 and SamplerV2 accept primitive unified
  blocs (PUBs) and return results per PUB.
""",
}

TOPICS = [
    "transpiler",
    "circuit library",
    "quantum_info",
    "primitives",
    "pulse",
    "visualization",
    "qasm3 exporter",
    "synthesis",
    "providers",
    "result handling",
]


def filler(version: str, paragraphs: int) -> str:
    rng = random.Random(f"notes-{version}")
    chunks = ["Other Notes\n-----------\n"]
    for i in range(paragraphs):
        topic = rng.choice(TOPICS)
        n = rng.randint(2, 6)
        sentences = " ".join(
            f"Change {i}.{k} to the {topic} adjusts internal behaviour without altering the public interface."
            for k in range(n)
        )
        chunks.append(f"- {sentences}\n")
    return "\n".join(chunks)


def build() -> None:
    OUT.mkdir(exist_ok=True)
    kinds = []
    for version, kind, paragraphs in VERSIONS:
        head = f"Qiskit {version} Release Notes\n{'=' * (len(version) + 21)}\n\n"
        body = head + HIGHLIGHTS.get(version, "") + "\n" + filler(version, paragraphs)
        (OUT / f"{version}.en.txt").write_bytes(body.encode("utf-8"))
        kinds.append(f"{version} {kind}")
    (OUT / "kinds.txt").write_text("\n".join(kinds) + "\n", encoding="utf-8")


if __name__ == "__main__":
    build()
