"""Graphviz renderings of pretableaux, tableaux and models."""

from __future__ import annotations

from .formula import FormulaSet
from .kripke import PseudoModel
from .tableau import Pretableau, Tableau


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _label(name: str, formulas: FormulaSet) -> str:
    return _quote(name + "\n" + "\n".join(map(str, formulas)))


def pretableau_dot(pre: Pretableau) -> str:
    """Prestates are ellipses, states boxes; SR edges are drawn doubled,
    DR edges single and labelled with their mark."""
    out = ["digraph pretableau {", "  node [fontname=monospace];"]
    for i in range(len(pre.prestates)):
        out.append(f"  G{i} [shape=ellipse, label={_label(f'G{i}', pre.prestate_label(i))}];")
    for i in range(len(pre.states)):
        style = ", style=filled, fillcolor=mistyrose" if pre.space.inconsistent(pre.states[i]) else ""
        out.append(f"  S{i} [shape=box, label={_label(f'S{i}', pre.state_label(i))}{style}];")
    for pid, targets in enumerate(pre.double):
        for sid in targets:
            out.append(f'  G{pid} -> S{sid} [color="black:invis:black"];')
    for sid, edges in enumerate(pre.marked):
        for mark, pid in edges:
            out.append(f"  S{sid} -> G{pid} [label={_quote(str(pre.space.formulas[mark]))}];")
    out.append("}")
    return "\n".join(out) + "\n"


def tableau_dot(tab: Tableau, upto: int | None = None, title: str = "tableau") -> str:
    """The tableau after the first ``upto`` eliminations (all by default);
    removed states are greyed and annotated with rule and witness."""
    log = tab.log if upto is None else tab.log[:upto]
    removed = {e.state: e for e in log}
    name = "".join(ch if ch.isalnum() else "_" for ch in title)
    out = [f"digraph {name} {{", "  node [fontname=monospace, shape=box];", f"  label={_quote(title)};"]
    for s in range(len(tab.states)):
        text = f"S{s}\n" + "\n".join(map(str, tab.label(s)))
        if s in removed:
            e = removed[s]
            text += f"\n-- {e.rule}: {e.witness}"
            out.append(f"  S{s} [label={_quote(text)}, style=dashed, color=gray, fontcolor=gray];")
        else:
            out.append(f"  S{s} [label={_quote(text)}];")
    for s, edges in enumerate(tab.edges):
        for mark, t in edges:
            faded = ", color=gray, fontcolor=gray" if s in removed or t in removed else ""
            out.append(f"  S{s} -> S{t} [label={_quote(str(tab.space.formulas[mark]))}{faded}];")
    out.append("}")
    return "\n".join(out) + "\n"


def tableau_stages_dot(tab: Tableau) -> str:
    """One graph for the initial tableau and one after each elimination step."""
    parts = [tableau_dot(tab, 0, "initial tableau")]
    for k, (step, upto) in enumerate(tab.stages, 1):
        parts.append(tableau_dot(tab, upto, f"stage {k}: {step}"))
    return "".join(parts)


def model_dot(model: PseudoModel) -> str:
    """States with their atoms; one undirected edge per related pair,
    labelled with every coalition whose relation contains it."""
    u = model.universe
    out = ["graph model {", "  node [fontname=monospace, shape=circle];"]
    for s in model.states:
        atoms = ",".join(model.labeling[s]) or "-"
        extra = ", peripheries=2" if s == model.root else ""
        out.append(f"  s{s} [label={_quote(f'{s}: {atoms}')}{extra}];")
    pairs: dict[tuple[int, int], list[str]] = {}
    for m in u.coalitions():
        for s, t in sorted(model.relations[m]):
            if s < t:
                pairs.setdefault((s, t), []).append("{" + u.key(m) + "}")
    for (s, t), keys in sorted(pairs.items()):
        out.append(f"  s{s} -- s{t} [label={_quote(' '.join(keys))}];")
    out.append("}")
    return "\n".join(out) + "\n"
