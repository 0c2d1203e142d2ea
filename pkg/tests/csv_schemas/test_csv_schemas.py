"""Tests for the CSV schema table."""

# standard library imports:
from unittest import TestCase

# package imports:
from src.csv_schemas.csv_schemas import CSV_SCHEMAS, CsvColumn


class TestCsvSchemas(TestCase):
    """Tests for parsing and expanding the schema table."""

    def test_schemas(self) -> None:
        self.assertEqual(set(CSV_SCHEMAS), {"metrics", "audit", "audit_summary", "bench"})
        self.assertEqual(CSV_SCHEMAS["metrics"].file_name, "metrics.csv")
        for schema in CSV_SCHEMAS.values():
            self.assertTrue(all(c.description for c in schema.columns))

    def test_template_expansion(self) -> None:
        header = CSV_SCHEMAS["audit"].header(samples=[1, 5])
        self.assertEqual(
            header, ["step", "agent", "grand_value", "exact", "mc_1", "mc_5", "plain_cf", "uniform"]
        )

    def test_template_needs_values(self) -> None:
        with self.assertRaises(KeyError):
            CSV_SCHEMAS["audit"].header()

    def test_plain_schema_ignores_values(self) -> None:
        self.assertEqual(
            CSV_SCHEMAS["bench"].header(samples=[3]),
            [
                "n", "method", "samples", "coalitions",
                "marginal_evaluations", "critic_evaluations", "seconds",
            ],
        )

    def test_template_without_placeholder(self) -> None:
        with self.assertRaises(ValueError):
            CsvColumn("mc", "no placeholder", template=True)
