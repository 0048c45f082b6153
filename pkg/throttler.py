"""
Módulo de throttling de logs de progreso.
Evita que los barridos largos y los lotes de Monte Carlo llenen stderr
con una línea por paso.
"""

import time
import logging
from typing import Optional

from config import SIMULATION_CONFIG

logger = logging.getLogger(__name__)


class ProgressThrottler:
    """Decide qué pasos de un proceso largo se registran en el log."""

    def __init__(self):
        self.last_log_times = {}
        self.event_configs = {
            'sweep_point': {'throttle_seconds': 2.0, 'log_every_n': 10},
            'mc_batch': {'throttle_seconds': SIMULATION_CONFIG['progress_log_seconds'],
                         'log_every_n': SIMULATION_CONFIG['progress_log_every_n']},
            'default': {'throttle_seconds': 5.0, 'log_every_n': 10},
        }
        self.event_counters = {}

    def should_log(self, event_key: str, event_type: str = 'default', step_number: Optional[int] = None) -> bool:
        """
        Determina si un paso debe registrarse según tiempo transcurrido y frecuencia.

        Args:
            event_key: Clave única del proceso (p. ej. 'sweep:c1')
            event_type: Tipo de evento para la configuración de frecuencia
            step_number: Número de paso; el primero siempre se registra

        Returns:
            True si el paso debe registrarse
        """
        now = time.monotonic()
        config = self.event_configs.get(event_type, self.event_configs['default'])

        self.event_counters[event_key] = self.event_counters.get(event_key, 0) + 1

        last_time = self.last_log_times.get(event_key)
        time_passed = last_time is None or now - last_time >= config['throttle_seconds']
        count_reached = self.event_counters[event_key] % config['log_every_n'] == 0

        if step_number == 1 or time_passed or count_reached:
            self.last_log_times[event_key] = now
            return True
        return False

    def progress(self, event_key: str, done: int, total: int, event_type: str = 'default') -> None:
        """Registra 'done/total' si corresponde; el último paso siempre se registra."""
        if done == total or self.should_log(event_key, event_type, step_number=done):
            logger.info(f"📊 {event_key}: {done}/{total}")

    def get_stats(self, event_key: str) -> dict:
        return {
            'total_events': self.event_counters.get(event_key, 0),
            'last_log_time': self.last_log_times.get(event_key, 0),
        }

    def log_session_summary(self):
        """Resumen de pasos procesados por clave."""
        if self.event_counters:
            logger.info("📊 Resumen de progreso de la sesión:")
            for event_key, count in self.event_counters.items():
                logger.info(f"   {event_key}: {count} pasos")

    def reset_stats(self):
        self.last_log_times.clear()
        self.event_counters.clear()
        logger.debug("🔄 Estadísticas del throttler reiniciadas")


# Instancia global del throttler
progress_throttler = ProgressThrottler()
