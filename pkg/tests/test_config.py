"""
sisaug test suite
configuration tests
"""

import unittest

from sisaug import ToolConfig, sigma_from_kernel_size
from sisaug.basetypes import to_number, to_bool, derive_seed
from sisaug.config import (
    read_config, dump_config, save_config, load_config, resolve_config, WORKERS_ENV,
)

from .base import BaseTester


class TestConverters(BaseTester):

    def test_to_number(self):
        """Numbers may be given as fractions."""
        self.assertAlmostEqual(to_number('2/3'), 2/3)
        self.assertEqual(to_number('4'), 4)
        self.assertIsInstance(to_number('4'), int)
        self.assertEqual(to_number('0.25'), 0.25)

    def test_to_bool(self):
        self.assertTrue(to_bool('yes'))
        self.assertFalse(to_bool('off'))
        with self.assertRaises(ValueError):
            to_bool('maybe')

    def test_derive_seed(self):
        """Derived seeds are reproducible and differ between items."""
        self.assertEqual(derive_seed(7, 1, 2), derive_seed(7, 1, 2))
        self.assertNotEqual(derive_seed(7, 1), derive_seed(7, 2))
        self.assertNotEqual(derive_seed(7, 1), derive_seed(8, 1))


class TestConfig(BaseTester):

    def test_defaults(self):
        config = ToolConfig()
        self.assertEqual(config.seed, 0)
        self.assertEqual(config.warp.n_keypoints, 64)
        self.assertEqual(config.warp.tau, 0.5)
        self.assertEqual(config.warp.max_shift, 4.0)
        self.assertEqual(config.warp.lambda_reg, 1e-3)
        self.assertEqual(config.perturb.c0, 128.0)
        self.assertAlmostEqual(config.eval.delta, 2/3)
        self.assertEqual(config.eval.ignore_id, 255)
        self.assertEqual(config.io.workers, 1)

    def test_validation(self):
        """Out-of-range settings are rejected."""
        config = ToolConfig()
        with self.assertRaises(ValueError):
            config.update('warp', n_keypoints=2)
        with self.assertRaises(ValueError):
            config.update('warp', tau=1.5)
        with self.assertRaises(ValueError):
            config.update('warp', border='wrap')
        with self.assertRaises(ValueError):
            config.update('eval', delta=0)
        with self.assertRaises(ValueError):
            config.update('perturb', sigma0=-1)
        with self.assertRaises(ValueError):
            config.update('io', workers=0)
        with self.assertRaises(ValueError):
            config.update('warp', no_such_setting=1)

    def test_update_converts(self):
        """String settings are converted; None leaves a setting alone."""
        config = ToolConfig().update('warp', **{'max-shift': '2.5', 'n_keypoints': '16', 'tau': None})
        self.assertEqual(config.warp.max_shift, 2.5)
        self.assertEqual(config.warp.n_keypoints, 16)
        self.assertEqual(config.warp.tau, 0.5)
        config = config.update('eval', delta='1/2', n_classes='unset')
        self.assertEqual(config.eval.delta, 0.5)
        self.assertIsNone(config.eval.n_classes)

    def test_profile_sigma(self):
        """Dataset profiles supply the blur sigma unless one is set."""
        config = ToolConfig().update('perturb', dataset_profile='ade20k')
        self.assertEqual(config.perturb.blur_sigma(), 35.0)
        config = config.update('perturb', sigma0=3.0)
        self.assertEqual(config.perturb.blur_sigma(), 3.0)
        self.assertIsNone(ToolConfig().perturb.blur_sigma())
        self.assertEqual(sigma_from_kernel_size(75), 25.0)

    def test_as_record(self):
        """The record has output-affecting sections with dashed keys."""
        record = ToolConfig(seed=3).as_record()
        self.assertEqual(record['seed'], 3)
        self.assertEqual(record['warp']['n-keypoints'], 64)
        self.assertNotIn('io', record)


class TestConfigFiles(BaseTester):

    def test_read(self):
        text = (
            '# sample settings\n'
            'seed: 5\n'
            'warp:\n'
            '    max-shift: 1.5\n'
            '    border: ignore-fill\n'
            '\n'
            'eval:\n'
            '    delta: 1/2\n'
            '    allow-void: yes\n'
        )
        config = read_config(text)
        self.assertEqual(config.seed, 5)
        self.assertEqual(config.warp.max_shift, 1.5)
        self.assertEqual(config.warp.border, 'ignore-fill')
        self.assertEqual(config.eval.delta, 0.5)
        self.assertTrue(config.eval.allow_void)

    def test_read_errors(self):
        with self.assertRaises(ValueError):
            read_config('nonsense\n')
        with self.assertRaises(ValueError):
            read_config('colour:\n    red: 1\n')
        with self.assertRaises(ValueError):
            read_config('    max-shift: 1\n')

    def test_round_trip(self):
        """A written config reads back to the same settings."""
        config = ToolConfig(seed=11).update('warp', lambda_reg=0.0125, sampling='random')
        config = config.update('perturb', sigma0=27.0, lognormal=False)
        config = config.update('eval', n_classes=19)
        save_config(config, self.temp_path / 'run.cfg')
        self.assertEqual(load_config(self.temp_path / 'run.cfg'), config)

    def test_dump_excludes_workers(self):
        """Worker count does not appear in a written config."""
        config = ToolConfig().update('io', workers=8)
        assert 'workers' not in dump_config(config), 'Worker count in config output'
        self.assertEqual(dump_config(config), dump_config(ToolConfig()))


class TestResolve(BaseTester):

    def test_precedence(self):
        """Options override the config file."""
        (self.temp_path / 'a.cfg').write_text('seed: 4\nwarp:\n    tau: 0.25\n')
        config = resolve_config(self.temp_path / 'a.cfg', environ={})
        self.assertEqual((config.seed, config.warp.tau), (4, 0.25))
        config = resolve_config(
            self.temp_path / 'a.cfg', seed=9, warp={'tau': 0.75}, environ={}
        )
        self.assertEqual((config.seed, config.warp.tau), (9, 0.75))

    def test_workers_environment(self):
        """The environment sets the worker count only if no option does."""
        environ = {WORKERS_ENV: '3'}
        self.assertEqual(resolve_config(environ=environ).io.workers, 3)
        self.assertEqual(resolve_config(workers=2, environ=environ).io.workers, 2)
        self.assertEqual(resolve_config(environ={}).io.workers, 1)

    def test_profile_fills_sigma(self):
        (self.temp_path / 'p.cfg').write_text('perturb:\n    dataset-profile: cityscapes\n')
        config = resolve_config(self.temp_path / 'p.cfg', environ={})
        self.assertEqual(config.perturb.sigma0, 27.0)


if __name__ == '__main__':
    unittest.main()
