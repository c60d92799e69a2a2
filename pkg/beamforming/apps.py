from django.apps import AppConfig
import logging

logger = logging.getLogger(__name__)


class BeamformingConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'beamforming'
    verbose_name = 'Cell-free multi-RIS beamforming'
