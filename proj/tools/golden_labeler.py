#!/usr/bin/env python3
"""Reference def-use labels for the data-flow golden fixtures.

Walks CPython's own `ast` and applies the AU edge rules (Assign, For, Invoke,
Access, Para) to every statement of a file. Output is one JSON object per
line, `{"src", "dst", "line", "rule"}`, the same schema `flowrank dataflow
dump` prints. Labels were reviewed by hand on the fixture files.

    golden_labeler.py FILE.py [-o FILE.edges.jsonl]
    golden_labeler.py --fixtures tests/fixtures/golden --from-corpus tests/fixtures/corpus LIST
"""

import argparse
import ast
import json
import shutil
import sys
from pathlib import Path


def vm(node):
    """Objects of an expression: every Name and every attribute name."""
    out = []

    def visit(n):
        if isinstance(n, ast.Name):
            out.append(n.id)
        elif isinstance(n, ast.Attribute):
            visit(n.value)
            out.append(n.attr)
        elif isinstance(n, ast.keyword):
            visit(n.value)
        elif isinstance(n, ast.Lambda):
            for d in n.args.defaults + [d for d in n.args.kw_defaults if d is not None]:
                visit(d)
            visit(n.body)
        elif isinstance(n, ast.AST):
            for child in ast.iter_child_nodes(n):
                if isinstance(child, (ast.expr_context, ast.operator, ast.boolop, ast.unaryop, ast.cmpop)):
                    continue
                visit(child)

    visit(node)
    return out


def head(node):
    if isinstance(node, ast.Name):
        return node.id
    if isinstance(node, ast.Attribute):
        return node.attr
    if isinstance(node, ast.Call):
        return head(node.func)
    if isinstance(node, ast.Subscript):
        return head(node.value)
    return None


class Labeler:
    def __init__(self):
        self.edges = set()
        self.line = 0

    def emit(self, rule, sources, target):
        if target is None:
            return
        for s in sources:
            if s != target:
                self.edges.add((self.line, s, target, rule))

    def bind(self, target, value, sources, rule):
        if isinstance(target, ast.Name):
            self.emit(rule, sources, target.id)
        elif isinstance(target, ast.Attribute):
            self.emit(rule, sources, target.attr)
        elif isinstance(target, ast.Subscript):
            self.emit(rule, sources, head(target.value))
        elif isinstance(target, ast.Starred):
            self.bind(target.value, None, sources, rule)
        elif isinstance(target, (ast.Tuple, ast.List)):
            starred = lambda n: any(isinstance(e, ast.Starred) for e in n.elts)
            if (isinstance(value, (ast.Tuple, ast.List)) and len(value.elts) == len(target.elts)
                    and not starred(target) and not starred(value)):
                for t, v in zip(target.elts, value.elts):
                    self.bind(t, v, vm(v), rule)
            else:
                for t in target.elts:
                    self.bind(t, None, sources, rule)

    def walk(self, node):
        if node is None:
            return
        if isinstance(node, ast.Attribute):
            h = head(node.value)
            self.emit("Invoke", [h] if h else [], node.attr)
            self.walk(node.value)
        elif isinstance(node, ast.Call):
            self.walk(node.func)
            args = node.args + node.keywords
            if args:
                sources = []
                for a in args:
                    sources += vm(a)
                self.emit("Para", sources, head(node.func))
            for a in args:
                self.walk(a)
        elif isinstance(node, ast.keyword):
            self.walk(node.value)
        elif isinstance(node, ast.Subscript):
            self.walk(node.value)
            self.emit("Access", vm(node.slice), head(node.value))
            self.walk(node.slice)
        elif isinstance(node, ast.NamedExpr):
            self.walk(node.value)
            self.bind(node.target, node.value, vm(node.value), "Assign")
        elif isinstance(node, ast.Lambda):
            for d in node.args.defaults + [d for d in node.args.kw_defaults if d is not None]:
                self.walk(d)
            self.walk(node.body)
        elif isinstance(node, (ast.ListComp, ast.SetComp, ast.GeneratorExp, ast.DictComp)):
            for g in node.generators:
                self.walk(g.iter)
                self.bind(g.target, None, vm(g.iter), "For")
                self.walk(g.target)
                for c in g.ifs:
                    self.walk(c)
            if isinstance(node, ast.DictComp):
                self.walk(node.key)
                self.walk(node.value)
            else:
                self.walk(node.elt)
        elif isinstance(node, ast.AST):
            for child in ast.iter_child_nodes(node):
                self.walk(child)

    def block(self, body):
        for s in body:
            self.stmt(s)

    def stmt(self, s):
        # a decorated definition starts at its first decorator
        decorators = getattr(s, "decorator_list", None)
        self.line = decorators[0].lineno if decorators else s.lineno
        if isinstance(s, ast.Expr):
            self.walk(s.value)
        elif isinstance(s, ast.Assign):
            sources = vm(s.value)
            for t in s.targets:
                self.bind(t, s.value, sources, "Assign")
            self.walk(s.value)
            for t in s.targets:
                self.walk(t)
        elif isinstance(s, ast.AugAssign):
            self.bind(s.target, None, vm(s.value), "Assign")
            self.walk(s.value)
            self.walk(s.target)
        elif isinstance(s, ast.AnnAssign):
            if s.value is not None:
                self.bind(s.target, s.value, vm(s.value), "Assign")
                self.walk(s.value)
            self.walk(s.target)
        elif isinstance(s, (ast.For, ast.AsyncFor)):
            self.bind(s.target, None, vm(s.iter), "For")
            self.walk(s.iter)
            self.walk(s.target)
            self.block(s.body)
            self.block(s.orelse)
        elif isinstance(s, (ast.While, ast.If)):
            self.walk(s.test)
            self.block(s.body)
            self.block(s.orelse)
        elif isinstance(s, (ast.With, ast.AsyncWith)):
            for item in s.items:
                if item.optional_vars is not None:
                    self.bind(item.optional_vars, item.context_expr, vm(item.context_expr), "Assign")
                self.walk(item.context_expr)
                self.walk(item.optional_vars)
            self.block(s.body)
        elif isinstance(s, (ast.FunctionDef, ast.AsyncFunctionDef)):
            for d in s.decorator_list:
                self.walk(d)
            for d in s.args.defaults + [d for d in s.args.kw_defaults if d is not None]:
                self.walk(d)
            self.block(s.body)
        elif isinstance(s, ast.ClassDef):
            for d in s.decorator_list:
                self.walk(d)
            for b in s.bases + s.keywords:
                self.walk(b)
            self.block(s.body)
        elif isinstance(s, ast.Return):
            self.walk(s.value)
        elif isinstance(s, ast.Raise):
            self.walk(s.exc)
            self.walk(s.cause)
        elif isinstance(s, ast.Delete):
            for t in s.targets:
                self.walk(t)
        elif isinstance(s, ast.Assert):
            self.walk(s.test)
            self.walk(s.msg)
        elif isinstance(s, ast.Try):
            self.block(s.body)
            for h in s.handlers:
                if h.type is not None:
                    self.line = s.lineno
                    self.walk(h.type)
                self.block(h.body)
            self.block(s.orelse)
            self.block(s.finalbody)
        elif isinstance(s, ast.Match):
            self.walk(s.subject)
            for c in s.cases:
                if c.guard is not None:
                    self.line = s.lineno
                    self.walk(c.guard)
                self.block(c.body)


def label(source):
    labeler = Labeler()
    labeler.block(ast.parse(source).body)
    return [{"src": s, "dst": d, "line": line, "rule": rule} for line, s, d, rule in sorted(labeler.edges)]


def write_edges(edges, out):
    for e in edges:
        out.write(json.dumps(e) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("files", nargs="*")
    ap.add_argument("-o", "--output")
    ap.add_argument("--fixtures", help="write <stem>.py and <stem>.edges.jsonl pairs into this directory")
    ap.add_argument("--from-corpus", help="resolve FILES relative to this corpus root")
    args = ap.parse_args()

    if args.fixtures:
        dest = Path(args.fixtures)
        dest.mkdir(parents=True, exist_ok=True)
        root = Path(args.from_corpus or ".")
        for rel in args.files:
            src = root / rel
            stem = rel.replace("/", "__").removesuffix(".py")
            shutil.copyfile(src, dest / f"{stem}.py")
            with open(dest / f"{stem}.edges.jsonl", "w") as out:
                write_edges(label(src.read_text()), out)
            print(f"{stem}: {sum(1 for _ in src.open())} lines")
        return

    for path in args.files:
        edges = label(Path(path).read_text())
        if args.output:
            with open(args.output, "w") as out:
                write_edges(edges, out)
        else:
            write_edges(edges, sys.stdout)


if __name__ == "__main__":
    main()
