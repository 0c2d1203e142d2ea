from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence
import json

SCHEMA_TABLE = Path(__file__).parent / "csv_schemas.json"


@dataclass
class CsvColumn:
    """
    Information model for one column of an output CSV.

    A templated column (``mc_{samples}``) expands into one concrete column per
    value supplied when the header is built.

    Attributes:
        name (str)
        description (str)
        template (bool)
    """

    name: str
    description: str
    template: bool = False

    def __post_init__(self):
        if self.template and "{" not in self.name:
            raise ValueError(f"Templated column {self.name!r} has no placeholder.")

    def expand(self, **values: Sequence) -> List[str]:
        if not self.template:
            return [self.name]
        key = self.name[self.name.index("{") + 1 : self.name.index("}")]
        if key not in values:
            raise KeyError(f"Column {self.name!r} needs values for {key!r}.")
        return [self.name.format(**{key: v}) for v in values[key]]

    def __repr__(self):
        return f"CsvColumn ({self.name})"


@dataclass
class CsvSchema:
    """
    A fixed, documented CSV header.

    Attributes:
        name (str)
        file_name (str)
        columns (List[CsvColumn])
    """

    name: str
    file_name: str
    columns: List[CsvColumn] = field(default_factory=list)

    def header(self, **values: Sequence) -> List[str]:
        return [name for column in self.columns for name in column.expand(**values)]

    def __repr__(self):
        return f"CsvSchema {self.name}: {len(self.columns)} columns"


def csv_schema_parser(json_path: Path = SCHEMA_TABLE) -> Dict[str, CsvSchema]:
    """Parse the json schema table.

    Args:
        json_path (Path): Path to the JSON schema table.

    Returns:
        schema name → CsvSchema.
    """
    with open(json_path) as j:
        json_data = json.load(j)

    schemas = {}
    for s in json_data["schemas"]:
        columns = [
            CsvColumn(c["name"], c["description"], c.get("template", False)) for c in s["columns"]
        ]
        schemas[s["name"]] = CsvSchema(s["name"], s["file_name"], columns)
    return schemas


CSV_SCHEMAS = csv_schema_parser()
