"""Attribute taxonomy: the ordered list of binary clothing attributes that
every classifier, CRF table, and report keys on.

Schema file format (UTF-8, line oriented):
  - blank lines and lines starting with '#' are ignored
  - an optional directive line ``!version <string>`` names the schema version
  - every other line is one attribute record of whitespace-separated
    key=value pairs (shell-style quoting for values with spaces)::

        id=striped_upper name="Striped (upper)" category=pattern_upper classic=false

Required keys: id, name, category, classic. Unknown keys are rejected.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass
from importlib import resources

from .errors import SchemaError

CATEGORIES = ("color_upper", "color_lower", "pattern_upper", "pattern_lower", "style")

_RECORD_KEYS = {"id", "name", "category", "classic"}
_BOOL = {"true": True, "false": False}


@dataclass(frozen=True)
class Attribute:
    id: str
    display_name: str
    category: str
    classic: bool = False

    def __post_init__(self) -> None:
        if not self.id:
            raise SchemaError("attribute id must be non-empty")
        if self.category not in CATEGORIES:
            raise SchemaError(f"unknown category {self.category!r} for attribute {self.id!r}")


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered, validated attribute list. Index positions are load order and
    are relied on by classifiers and CRF tables; instances are immutable."""

    attributes: tuple[Attribute, ...]
    version: str = "1"

    def __post_init__(self) -> None:
        if not self.attributes:
            raise SchemaError("schema contains no attributes")
        seen: set[str] = set()
        for attr in self.attributes:
            if attr.id in seen:
                raise SchemaError(f"duplicate attribute id {attr.id!r}")
            seen.add(attr.id)

    def __len__(self) -> int:
        return len(self.attributes)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(a.id for a in self.attributes)

    def index_of(self, attribute_id: str) -> int:
        try:
            return self.ids.index(attribute_id)
        except ValueError:
            raise SchemaError(f"attribute {attribute_id!r} not in schema") from None

    def by_id(self, attribute_id: str) -> Attribute:
        return self.attributes[self.index_of(attribute_id)]


def load_schema(text: str) -> AttributeSchema:
    """Parse schema text into a validated AttributeSchema."""
    attributes: list[Attribute] = []
    version = "1"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("!"):
            parts = line.split(None, 1)
            if parts[0] != "!version" or len(parts) != 2:
                raise SchemaError(f"line {lineno}: unknown directive {parts[0]!r}")
            version = parts[1].strip()
            continue
        try:
            tokens = shlex.split(line, comments=False)
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from exc
        fields: dict[str, str] = {}
        for token in tokens:
            if "=" not in token:
                raise SchemaError(f"line {lineno}: expected key=value, got {token!r}")
            key, value = token.split("=", 1)
            if key not in _RECORD_KEYS:
                raise SchemaError(f"line {lineno}: unknown key {key!r}")
            if key in fields:
                raise SchemaError(f"line {lineno}: repeated key {key!r}")
            fields[key] = value
        missing = _RECORD_KEYS - fields.keys()
        if missing:
            raise SchemaError(f"line {lineno}: missing keys {sorted(missing)}")
        if fields["classic"] not in _BOOL:
            raise SchemaError(f"line {lineno}: classic must be true or false")
        attributes.append(
            Attribute(
                id=fields["id"],
                display_name=fields["name"],
                category=fields["category"],
                classic=_BOOL[fields["classic"]],
            )
        )
    return AttributeSchema(attributes=tuple(attributes), version=version)


def serialize_schema(schema: AttributeSchema) -> str:
    """Inverse of load_schema: load_schema(serialize_schema(s)) == s."""
    lines = [f"!version {schema.version}"]
    for a in schema.attributes:
        name = shlex.quote(a.display_name)
        classic = "true" if a.classic else "false"
        lines.append(f"id={a.id} name={name} category={a.category} classic={classic}")
    return "\n".join(lines) + "\n"


def load_schema_file(path: str) -> AttributeSchema:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise SchemaError(f"cannot read schema file {path}: {exc}") from exc
    return load_schema(text)


def load_default_schema() -> AttributeSchema:
    """The bundled 60-attribute taxonomy."""
    text = resources.files("trendscope.data").joinpath("default_attributes.txt").read_text("utf-8")
    return load_schema(text)


def classic_ids(schema: AttributeSchema) -> set[str]:
    """Ids of attributes flagged classic (excluded from delta analysis)."""
    return {a.id for a in schema.attributes if a.classic}
