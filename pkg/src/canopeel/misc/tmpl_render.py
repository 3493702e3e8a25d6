"""Module for rendering Jinja2 templates used for the human-readable command reports."""

from typing import Any

from jinja2 import Environment, FileSystemLoader, StrictUndefined

from canopeel.misc.dataclasses import Paths

__all__: tuple[str] = ("TmplRender",)


def _fmt(value: Any, digits: int = 4) -> str:
    """
    Formats a number for a report table, infinities are written as "inf".

    :param value: Number to format.
    :param digits: Digits after the decimal point.
    :return: Formatted string.
    """
    number: float = float(value)
    if number != number:  # NaN
        return "nan"
    if number in (float("inf"), float("-inf")):
        return "inf" if number > 0 else "-inf"
    return f"{number:.{digits}f}"


class TmplRender:
    """Returns the rendered template, based on the passed data."""

    def __init__(self, paths: Paths) -> None:
        """
        Initializes the necessary parameters.

        :param paths: Paths object.
        """
        self._env: Environment = Environment(
            trim_blocks=True,
            lstrip_blocks=True,
            loader=FileSystemLoader(searchpath=paths.tmpl),
            undefined=StrictUndefined,
            keep_trailing_newline=True,
        )
        self._env.filters["fmt"] = _fmt

    def templates(self) -> list[str]:
        """
        Returns the names of the available templates.

        :return: Sorted template names.
        """
        return sorted(self._env.list_templates(extensions=["jinja2"]))

    def render(self, tmpl: str, data: dict | None = None) -> str:
        """
        Returns the rendered template, based on the passed data.

        :param tmpl: Template name.
        :param data: Data to pass to the template.
        :return: Rendered template as string.
        """
        data_to_render: dict = data or {}
        return self._env.get_template(name=tmpl).render(**data_to_render)
