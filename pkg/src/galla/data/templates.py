"""Question and answer templates for the alignment tasks.

The GraphQA tables are kept verbatim, including their original punctuation.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache


@dataclass(frozen=True)
class TemplateTable:
    task: str
    question_templates: tuple[str, ...]
    answer_templates_positive: tuple[str, ...]
    answer_templates_negative: tuple[str, ...]


EDGE_PRED = TemplateTable(
    "EdgePred",
    (
        "In the graph, is there an edge from {node_type1} {node1} to {node_type2} {node2}?",
        "In the graph, is there an edge pointing from {node_type1} {node1} to {node_type2} {node2}?",
        "Please tell me if there is an edge pointing from {node_type1} {node1} to {node_type2} {node2} in this graph.",
        "Is there an edge from {node_type1} {node1} to {node_type2} {node2} in this graph?",
        "Does a connection exist from {node_type1} {node1} to {node_type2} {node2} in the graph?",
        "In this graph, do we have an edge leading from {node_type1} {node1} to {node_type2} {node2}?",
        "Is it true that {node_type1} {node1} is a predecessor of {node_type2} {node2} in this graph?",
    ),
    (
        "Yes, that is the case.",
        "Yes, there is an edge from {node_type1} {node1} to {node_type2} {node2}.",
        "Yes, there is an edge from {node_type1} {node1} to {node_type2} {node2} in this graph.",
        "Yes, there is an edge pointing from {node_type1} {node1} to {node_type2} {node2} in this graph.",
        "Affirmative, there exists an edge from {node_type1} {node1} to {node_type2} {node2}.",
        "Yes, that is the case. {node1} is directly connected to {node2}.",
    ),
    (
        "No, that is not the case.",
        "No, {node_type1} {node1} is not linked to {node_type2} {node2} by any edge in this graph.",
        "No, there is no edge from {node_type1} {node1} to {node_type2} {node2}.",
        "No, such an edge is absent from the graph.",
        "The graph does not show {node_type1} {node1} as a predecessor to {node_type2} {node2}.",
    ),
)

PARENT_PRED = TemplateTable(
    "ParentPred",
    (
        "In the graph, what is the parent node of this {node_type}: {node}.",
        "What is the parent of {node_type} {node} in this graph?",
        "What is the parent node of {node_type} {node} in the graph?",
        "Based on the graph, identify the parent of {node_type} {node}.",
        "Based on this graph, identify the parent of this {node_type}: {node}.",
        "Identify the parent of {node_type} {node} in the graph.",
        "In the graph presented, what is the predecessor of {node_type} {node}?",
        "What node acts as the parent to {node_type} {node} in the graph displayed?",
        "Can you determine the parent node of {node_type} {node} in this graph?",
        "Which node is directly above {node_type} {node} in the hierarchy of the provided graph?",
        "What is the immediate ancestor of the {node_type} {node} in this graph?",
        "Regarding the graph, can you point out the parent of {node_type} {node}?",
        "In terms of graph theory, what is the parent of the {node_type} {node}?",
        "Who has the parental role for {node_type} {node} in the graph's topology?",
        "For {node_type} {node} in the given graph, which node supplies the incoming edge?",
    ),
    (
        "In the given graph, the parent of the given {node_type} is {parent}, which is a {parent_type}.",
        "This {node_type}'s parent is the {parent_type} {parent}.",
        "The given {node_type}'s parent in the graph is the {parent_type} {parent}.",
        "The parent of {node_type} {node} in this graph is identified as {parent}, categorized as a {parent_type}.",
        "Node {parent}, a {parent_type}, serves as the parent to {node_type} {node} in the graph.",
        "As per the hierarchy, the {parent_type} node {parent} is the direct predecessor to {node_type} {node}.",
        "Upon inspection, it is clear that the parent of {node_type} {node} is the {parent_type} {parent}.",
        "The {node_type} {node} is immediately descended from {parent}, a {parent_type} in the graph.",
        "Within the nodal arrangement, {parent} is the progenitor to {node_type} {node}, "
        "having the classification of a {parent_type}.",
        'Tracing the edges leads to confirming {parent}, a {parent_type}, as the parent of {node_type} {node}."',
    ),
    (
        "This {node_type} has no parent in the graph.",
        "There is no edge pointing to this {node_type} in the given graph. Therefore it does not have any parent.",
        "Within this graph, {node_type} {node} does not have a parent node.",
        "{node_type} {node} stands without a parent in the graph's existing structure.",
        "No parent node is associated with {node_type} {node} in the provided graph.",
        "A review of the graph establishes that there is no preceding node to {node_type} {node}; it has no parent.",
        "In this graph topology, {node_type} {node} is an orphan node with no parent.",
        "There is no edge incoming to {node_type} {node}, indicating the absence of a parent.",
        "After analyzing the graph, it becomes evident that {node_type} {node} lacks a directly linked parent node.",
        "As depicted in the graph, {node_type} {node} exists without a parent node.",
    ),
)

CHILD_PRED = TemplateTable(
    "ChildPred",
    (
        "In this graph, what are the children of this {node_type}: {node}.",
        "Identify all children of {node_type} {node} in this graph.",
        "Find the child nodes of {node_type} {node} in the graph.",
        "In the graph, how many children does the {node_type} {node} have? What are they?",
        "How many children does {node_type} {node} have in this graph? What are they?",
        "Please find all children of {node_type} {node} in this graph.",
        "Can you find all children of {node_type} {node} in this graph?",
        "List all the descendant nodes of {node_type} {node} in this graph.",
        "What are the direct children of the {node_type} {node}?",
        "Can you enumerate the offspring of {node_type} {node} within this graph?",
        "Could you provide the list of child nodes attached to {node_type} {node}?",
        "Please identify the child nodes emanating from {node_type} {node}.",
        "Show me the child nodes of {node_type} {node}.",
        "What nodes are directly connected to {node_type} {node} as its children?",
        "I need to know all the child elements of {node_type} {node}. Can you provide that?",
        "Are there any nodes that directly derive from {node_type} {node} in this graph?",
        "Which nodes act as successors to the node tagged as {node_type} {node}?",
        "What are the adjacent nodes that are children of {node_type} {node}?",
        "Identify the nodes that are immediate successors of {node_type} {node} in this graph.",
        "Detail the nodes branching from {node_type} {node} in this graph structure.",
        "Reveal all nodes that are directly beneath {node_type} {node} in the hierarchy.",
    ),
    (
        "The given {node_type} has {child_num} children in the graph, they are: {child_nodes}",
        "This {node_type} has {child_num} children: {child_nodes}",
        "{node_type} {node} has a total of {child_num} children in this graph, which are: {child_nodes}",
        "There are {child_num} child nodes of {node_type} {node}, specifically: {child_nodes}",
        "As for the children of {node_type} {node}, you will find {child_num} direct descendants: {child_nodes}",
        "The count of {node_type} {node}'s children amounts to {child_num}. They include: {child_nodes}",
        "{node_type} {node} is parent to the following {child_num} nodes: {child_nodes}",
        "A list of the {child_num} children under {node_type} {node} is as follows: {child_nodes}",
        "Directly under {node_type} {node}, there are {child_num} children listed as: {child_nodes}",
        "{child_num} children spring from {node_type} {node}, which are given below: {child_nodes}",
    ),
    (
        "This {node_type} does not have any child nodes in the graph.",
        "This {node_type} does not have any children in the graph.",
        "There are no children of this {node_type} in the given graph.",
        "The given {node_type} does not have any children in the graph.",
        "After examining the graph, it's determined that this {node_type} has no children.",
        "I've checked the {node_type} {node} and found it has no direct descendants.",
        "There are no child nodes attached to {node_type} {node} in this graph.",
        "No descendants can be traced from this {node_type}.",
        "The {node_type} {node} is devoid of child nodes within the current graph structure.",
        "It appears {node_type} {node} has no children.",
    ),
)

# Repo-authored instructions for tasks whose prompts the tables above do not cover.
GRAPH2CODE = TemplateTable(
    "Graph2Code",
    (
        "Write the source code that this graph represents.",
        "Reconstruct the program from its graph.",
        "Generate the code corresponding to the given graph.",
    ),
    ("{code}",),
    (),
)

DOWNSTREAM = TemplateTable(
    "Downstream",
    (
        "Explain what the following program contains.\n{code}",
        "Describe the structure of this code.\n{code}",
        "Summarize the function below.\n{code}",
    ),
    ("{description}",),
    (),
)

TABLES = {t.task: t for t in (EDGE_PRED, PARENT_PRED, CHILD_PRED, GRAPH2CODE, DOWNSTREAM)}

PLACEHOLDER = re.compile(r"\{([a-z_0-9]+)\}")

NODE_TYPE_LABELS = {
    "Program": "program",
    "FunctionDecl": "function declaration",
    "Parameters": "parameter list",
    "Parameter": "parameter",
    "Block": "block",
    "AssignStmt": "assignment statement",
    "ReturnStmt": "return statement",
    "IfStmt": "if statement",
    "WhileStmt": "while loop",
    "ForStmt": "for loop",
    "CallExpr": "call expression",
    "BinaryExpr": "binary expression",
    "UnaryExpr": "unary expression",
    "Variable": "variable",
    "Literal": "literal",
    "ConditionExpr": "condition expression",
}

_TYPE_ALT = "|".join(sorted((re.escape(v) for v in NODE_TYPE_LABELS.values()), key=len, reverse=True))
FIELD_PATTERNS = {
    "node_type": _TYPE_ALT,
    "node_type1": _TYPE_ALT,
    "node_type2": _TYPE_ALT,
    "parent_type": _TYPE_ALT,
    "node": r'"[^"\n]*"',
    "node1": r'"[^"\n]*"',
    "node2": r'"[^"\n]*"',
    "parent": r'"[^"\n]*"',
    "child_num": r"[0-9]+",
    "child_nodes": r".+",
    "code": r"(?s:.+)",
    "description": r".+",
}


def fill(template: str, **values) -> str:
    """Bind every placeholder; a missing value raises KeyError."""
    return PLACEHOLDER.sub(lambda m: str(values[m.group(1)]), template)


@lru_cache(maxsize=None)
def template_regex(template: str) -> re.Pattern:
    """Regex matching instantiations of ``template``; repeated placeholders must agree."""
    out = []
    seen: set[str] = set()
    pos = 0
    for m in PLACEHOLDER.finditer(template):
        out.append(re.escape(template[pos : m.start()]))
        name = m.group(1)
        if name in seen:
            out.append(f"(?P={name})")
        else:
            out.append(f"(?P<{name}>{FIELD_PATTERNS[name]})")
            seen.add(name)
        pos = m.end()
    out.append(re.escape(template[pos:]))
    return re.compile("".join(out))


def match_template(text: str, templates) -> tuple[int, dict[str, str]] | None:
    """(template index, bound fields) for the first template that fully matches ``text``."""
    for i, t in enumerate(templates):
        m = template_regex(t).fullmatch(text)
        if m:
            return i, m.groupdict()
    return None
