"""Network generators and the Monte Carlo campaign driver."""

from sil.harness.campaign import CampaignConfig, CampaignReport, CellReport, report_from_store, run_campaign
from sil.harness.generators import assign_strong_weak, gen_erdos_renyi, gen_fixture, gen_political_party

__all__ = [
    "CampaignConfig",
    "CampaignReport",
    "CellReport",
    "assign_strong_weak",
    "gen_erdos_renyi",
    "gen_fixture",
    "gen_political_party",
    "report_from_store",
    "run_campaign",
]
