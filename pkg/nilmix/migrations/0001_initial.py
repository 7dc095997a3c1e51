# Generated by Django 4.2 on 2026-10-17 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('spectrum', 'Simultaneous spectrum'), ('ergodic', 'Ergodicity certificate'), ('anosov', 'Anosov check'), ('lyapunov-constant', 'Lyapunov constant'), ('height', 'Heights'), ('waldschmidt', 'Waldschmidt bound'), ('sunit-search', 'S-unit search'), ('mix-exact', 'Exact multi-correlation'), ('mix-mc', 'Monte-Carlo correlation'), ('shape', 'Shape power law'), ('boxmap-check', 'Box-map dichotomy'), ('cocycle', 'Cocycle rigidity')], max_length=20)),
                ('config_sha256', models.CharField(db_index=True, max_length=64)),
                ('resolved_config', models.JSONField(default=dict)),
                ('exit_status', models.PositiveSmallIntegerField()),
                ('output_path', models.CharField(blank=True, max_length=500)),
                ('output_format', models.CharField(choices=[('json', 'JSON'), ('csv', 'CSV')], default='json', max_length=4)),
                ('version', models.CharField(max_length=20)),
                ('message', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
