"""Static checks on where hashing and signing primitives are used."""

import ast
from pathlib import Path

import vpkiaas

ROOT = Path(vpkiaas.__file__).parent
# the only modules allowed to touch raw hash primitives
PRIMITIVE_MODULES = {"core/encoding.py", "core/crypto.py", "_chain_py.py"}


def _imports(path: Path) -> set[str]:
    names = set()
    for node in ast.walk(ast.parse(path.read_text())):
        if isinstance(node, ast.Import):
            names.update(a.name for a in node.names)
        elif isinstance(node, ast.ImportFrom) and node.module:
            names.add(node.module)
    return names


def test_services_hash_only_through_core():
    offenders = []
    for path in ROOT.rglob("*.py"):
        rel = path.relative_to(ROOT).as_posix()
        if rel in PRIMITIVE_MODULES:
            continue
        bad = {n for n in _imports(path) if n == "hashlib" or n.startswith("cryptography")}
        if bad:
            offenders.append((rel, sorted(bad)))
    assert offenders == []


def test_compiled_kernel_source_uses_same_primitive():
    src = (ROOT / "_chain_ext.pyx").read_text()
    assert "SHA256(" in src and "hashlib" not in src
