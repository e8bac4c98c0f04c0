#!/usr/bin/env python3
"""Regenerate data/stdlib_index.json and data/type_index.json.

Both files are built by introspecting the running interpreter, so the output
depends on the Python version; the version is recorded in each file.

    python3 tools/gen_indexes.py --out data
"""

import argparse
import builtins
import contextlib
import importlib
import inspect
import io
import json
import pkgutil
import sys
import warnings

FORMAT_VERSION = 1

# Modules with import-time side effects or GUI/test payloads.
SKIP = {
    "antigravity", "this", "idlelib", "tkinter", "turtle", "turtledemo", "test",
    "lib2to3", "ensurepip", "venv", "pydoc_data", "__main__", "xxsubtype",
    "_xxsubinterpreters", "_xxtestfuzz", "msilib", "winreg", "winsound", "_winapi",
    "msvcrt", "nt", "_msi", "_overlapped", "_tkinter",
}

BUILTIN_TYPES = [
    "str", "bytes", "bytearray", "list", "dict", "set", "frozenset", "tuple",
    "int", "float", "complex", "bool", "range", "memoryview", "slice", "object",
]


def public(name):
    return not name.startswith("_")


def quiet_import(name):
    with warnings.catch_warnings(), contextlib.redirect_stdout(io.StringIO()), \
            contextlib.redirect_stderr(io.StringIO()):
        warnings.simplefilter("ignore")
        try:
            return importlib.import_module(name)
        except BaseException:  # noqa: BLE001 - any import failure just skips the module
            return None


def class_methods(cls):
    out = set()
    for name in dir(cls):
        if not public(name):
            continue
        try:
            attr = getattr(cls, name)
        except Exception:  # noqa: BLE001
            continue
        if callable(attr):
            out.add(name)
    return out


def module_callables(mod):
    names = set()
    for name in dir(mod):
        if not public(name):
            continue
        try:
            obj = getattr(mod, name)
        except Exception:  # noqa: BLE001
            continue
        if inspect.ismodule(obj) or not callable(obj):
            continue
        names.add(name)
        if inspect.isclass(obj) and getattr(obj, "__module__", None) == mod.__name__:
            names |= class_methods(obj)
    return names


def stdlib_modules():
    roots = sorted(n for n in sys.stdlib_module_names if public(n) and n not in SKIP)
    for root in roots:
        mod = quiet_import(root)
        if mod is None:
            continue
        yield root, mod
        for info in pkgutil.iter_modules(getattr(mod, "__path__", None) or []):
            if not public(info.name) or info.name in SKIP or info.name == "tests":
                continue
            sub = quiet_import(f"{root}.{info.name}")
            if sub is not None:
                yield f"{root}.{info.name}", sub


def builtin_entry():
    names = set()
    for name in dir(builtins):
        if not public(name):
            continue
        obj = getattr(builtins, name)
        if inspect.isclass(obj) and issubclass(obj, BaseException):
            continue
        if callable(obj):
            names.add(name)
    for t in BUILTIN_TYPES:
        names |= class_methods(getattr(builtins, t))
    return sorted(names)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data")
    args = ap.parse_args()

    version = "%d.%d.%d" % sys.version_info[:3]
    modules = {"builtins": builtin_entry()}
    for name, mod in stdlib_modules():
        if name == "builtins":
            continue
        entries = sorted(module_callables(mod))
        if entries:
            modules[name] = entries
    import posixpath
    modules["os.path"] = sorted(module_callables(posixpath))

    types = {}
    for t in BUILTIN_TYPES:
        cls = getattr(builtins, t)
        types[t] = sorted(n for n in dir(cls) if callable(getattr(cls, n, None)))

    with open(f"{args.out}/stdlib_index.json", "w") as f:
        json.dump({"format": "flowrank-stdlib-index", "version": FORMAT_VERSION, "python": version,
                   "modules": dict(sorted(modules.items()))}, f, indent=0, sort_keys=False)
        f.write("\n")
    with open(f"{args.out}/type_index.json", "w") as f:
        json.dump({"format": "flowrank-type-index", "version": FORMAT_VERSION, "python": version,
                   "types": types}, f, indent=0)
        f.write("\n")
    print(f"{len(modules)} modules, {len(types)} types (Python {version})")


if __name__ == "__main__":
    main()
