"""Prompt templates shipped as package data."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

_VE_ELEMENTS = "{elements_text}"
_VE_COUNT = "{len(elements_list)}"


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return resources.files("floweval.backends").joinpath("prompts", name).read_text("utf-8")


def ocr_prompt() -> str:
    return load_template("ocr.txt")


def element_kind(rendered: str) -> str:
    return "edge" if " -->" in rendered else "node"


def format_elements(elements: list[str]) -> str:
    return "\n".join(f"{i}. {element_kind(e)}: {e}" for i, e in enumerate(elements, 1))


def ve_prompt(elements: list[str]) -> str:
    text = load_template("ve_structured.txt")
    return text.replace(_VE_ELEMENTS, format_elements(elements)).replace(
        _VE_COUNT, str(len(elements))
    )
